#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ar1dp/kernels.hpp"

namespace ar1dp::kernels {
namespace {

void gaussian_scores(double y, const double* mu, const double* prec, const double* log_norm,
                     const double* log_w, double* out, std::size_t n) {
  for (std::size_t h = 0; h < n; ++h) {
    const double d = y - mu[h];
    out[h] = log_w[h] + log_norm[h] - 0.5 * prec[h] * d * d;
  }
}

double max_value(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double exp_shifted(const double* x, double shift, double* out, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - shift);
    sum += out[i];
  }
  return sum;
}

void ar1_step(const double* prev, const double* noise, double psi, double sd, double* out,
              std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = psi * prev[i] + sd * noise[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void mixture_density(const double* grid, std::size_t num_grid, const double* w,
                     const double* mu, const double* prec, std::size_t num_comp,
                     double* out) {
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  for (std::size_t h = 0; h < num_comp; ++h) {
    if (w[h] == 0.0) continue;
    const double coef = w[h] * std::sqrt(prec[h]) * inv_sqrt_2pi;
    const double half_prec = 0.5 * prec[h];
    for (std::size_t g = 0; g < num_grid; ++g) {
      const double d = grid[g] - mu[h];
      out[g] += coef * std::exp(-half_prec * d * d);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar, gaussian_scores, max_value, exp_shifted,
                                 ar1_step,    dot,             mixture_density};
  return table;
}

}  // namespace ar1dp::kernels
