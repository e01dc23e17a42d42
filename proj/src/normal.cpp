#include "ar1dp/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ar1dp {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kQuantileClamp = 1e-15;

// Wichura's AS241 (PPND16), lower-tail form: returns x with Phi(x) = p for
// p in (0, 0.5].
double ppnd16_lower(double p) noexcept {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = std::sqrt(-std::log(p));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return -val;
}

// x with Phi(x) = p for p <= 0.5, polished by one Halley step on the tail.
double lower_tail_quantile(double p) noexcept {
  double x = ppnd16_lower(p);
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double log_normal_sf(double x) noexcept {
  if (x < 0.0) return std::log1p(-normal_cdf(x));
  if (x < 37.0) return std::log(normal_sf(x));
  // Asymptotic Mills-ratio expansion; erfc underflows past here.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x) - kLogSqrt2Pi +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

double normal_quantile(double p) noexcept {
  p = std::clamp(p, kQuantileClamp, 1.0 - kQuantileClamp);
  if (p <= 0.5) return lower_tail_quantile(p);
  return -lower_tail_quantile(1.0 - p);
}

double normal_quantile_upper(double q) noexcept {
  q = std::clamp(q, kQuantileClamp, 1.0 - kQuantileClamp);
  if (q <= 0.5) return -lower_tail_quantile(q);
  return lower_tail_quantile(1.0 - q);
}

double normal_quantile_upper_log(double log_q) noexcept {
  if (log_q >= std::log(kQuantileClamp)) return normal_quantile_upper(std::exp(log_q));
  // Deep upper tail: Newton on log(1 - Phi(x)) = log_q from the asymptotic
  // root. log_normal_sf is concave with slope -phi/Q, so the iterates
  // approach monotonically.
  const double a = -2.0 * log_q;
  double x = std::sqrt(a - std::log(a) - 2.0 * kLogSqrt2Pi);
  for (int i = 0; i < 50; ++i) {
    const double ls = log_normal_sf(x);
    const double slope = -std::exp(-0.5 * x * x - kLogSqrt2Pi - ls);
    const double step = (ls - log_q) / slope;
    x -= step;
    if (std::abs(step) <= 1e-15 * x) break;
  }
  return x;
}

double normal_logpdf(double x, double mean, double variance) noexcept {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

}  // namespace ar1dp
