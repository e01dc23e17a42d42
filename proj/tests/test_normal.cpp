#include <cmath>
#include <limits>

#include <doctest.h>

#include "ar1dp/normal.hpp"
#include "support/stats.hpp"

using namespace ar1dp;
namespace bm = boost::math;

TEST_CASE("normal cdf and survival agree with an independent implementation") {
  const bm::normal_distribution<double> z;
  for (double x = -37.0; x <= 37.0; x += 0.173) {
    const double cdf = bm::cdf(z, x);
    const double sf = bm::cdf(bm::complement(z, x));
    CHECK(normal_cdf(x) == doctest::Approx(cdf).epsilon(1e-12));
    CHECK(normal_sf(x) == doctest::Approx(sf).epsilon(1e-12));
    CHECK(log_normal_sf(x) == doctest::Approx(std::log(sf)).epsilon(1e-12));
  }
}

TEST_CASE("log survival stays finite far in the upper tail") {
  // log Q(x) ~ -x^2/2 - log(x sqrt(2 pi)) for large x.
  for (double x : {40.0, 100.0, 1e3}) {
    const double approx = -0.5 * x * x - std::log(x) - kLogSqrt2Pi - 1.0 / (x * x);
    CHECK(std::isfinite(log_normal_sf(x)));
    CHECK(log_normal_sf(x) == doctest::Approx(approx).epsilon(1e-6));
  }
  CHECK(log_normal_sf(-40.0) == doctest::Approx(0.0));
}

TEST_CASE("normal quantile inverts the cdf") {
  const bm::normal_distribution<double> z;
  for (double p : {1e-15, 1e-12, 1e-8, 1e-4, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1 - 1e-6}) {
    CHECK(normal_quantile(p) == doctest::Approx(bm::quantile(z, p)).epsilon(1e-12));
  }
  for (double q : {1e-15, 1e-10, 1e-3, 0.2}) {
    CHECK(normal_quantile_upper(q) ==
          doctest::Approx(bm::quantile(bm::complement(z, q))).epsilon(1e-12));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("normal quantile clamps to finite values at the boundary") {
  CHECK(std::isfinite(normal_quantile(0.0)));
  CHECK(std::isfinite(normal_quantile(1.0)));
  CHECK(normal_quantile(0.0) == doctest::Approx(normal_quantile(1e-15)));
  CHECK(normal_quantile(1.0) == doctest::Approx(-normal_quantile(1e-15)));
}

TEST_CASE("normal log density") {
  CHECK(normal_logpdf(0.0, 0.0, 1.0) == doctest::Approx(-kLogSqrt2Pi));
  const bm::normal_distribution<double> d(1.5, 2.0);
  CHECK(normal_logpdf(0.3, 1.5, 4.0) == doctest::Approx(std::log(bm::pdf(d, 0.3))).epsilon(1e-13));
}

TEST_CASE("log-scale upper quantile reaches past the clamp") {
  const bm::normal_distribution<double> z;
  for (double lq : {-1.0, -10.0, -34.0, -35.0, -100.0, -700.0, -5000.0}) {
    CAPTURE(lq);
    const double x = normal_quantile_upper_log(lq);
    CHECK(log_normal_sf(x) == doctest::Approx(lq).epsilon(1e-13));
    if (lq > -700.0) CHECK(x == doctest::Approx(bm::quantile(bm::complement(z, std::exp(lq)))).epsilon(1e-12));
  }
}
