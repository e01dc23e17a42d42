// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ar1dp/kernels.hpp"

namespace ar1dp::kernels {
namespace {

constexpr std::size_t kLanes = 4;

// Cephes-style exp: x = n*ln2 + r, exp(r) from a (2,3) Pade form, 2^n built
// in the exponent field. Inputs below -708.39 flush to zero.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.39641853226408);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d fx = _mm256_floor_pd(
      _mm256_fmadd_pd(x, _mm256_set1_pd(1.4426950408889634073599), _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878E-4), xx,
                               _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), xx,
                               _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
  n = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(n));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

void gaussian_scores(double y, const double* mu, const double* prec, const double* log_norm,
                     const double* log_w, double* out, std::size_t n) {
  const __m256d vy = _mm256_set1_pd(y);
  const __m256d half = _mm256_set1_pd(-0.5);
  std::size_t h = 0;
  for (; h + kLanes <= n; h += kLanes) {
    const __m256d d = _mm256_sub_pd(vy, _mm256_loadu_pd(mu + h));
    const __m256d base = _mm256_add_pd(_mm256_loadu_pd(log_w + h), _mm256_loadu_pd(log_norm + h));
    const __m256d hp = _mm256_mul_pd(half, _mm256_loadu_pd(prec + h));
    _mm256_storeu_pd(out + h, _mm256_fmadd_pd(_mm256_mul_pd(hp, d), d, base));
  }
  for (; h < n; ++h) {
    const double d = y - mu[h];
    out[h] = log_w[h] + log_norm[h] - 0.5 * prec[h] * d * d;
  }
}

double max_value(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= kLanes) {
    __m256d vm = _mm256_set1_pd(m);
    for (; i + kLanes <= n; i += kLanes) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    m = hmax(vm);
  }
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

double exp_shifted(const double* x, double shift, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vs));
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    out[i] = std::exp(x[i] - shift);
    sum += out[i];
  }
  return sum;
}

void ar1_step(const double* prev, const double* noise, double psi, double sd, double* out,
              std::size_t n) {
  const __m256d vpsi = _mm256_set1_pd(psi);
  const __m256d vsd = _mm256_set1_pd(sd);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d v = _mm256_mul_pd(vpsi, _mm256_loadu_pd(prev + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vsd, _mm256_loadu_pd(noise + i), v));
  }
  for (; i < n; ++i) out[i] = psi * prev[i] + sd * noise[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
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
    const __m256d vcoef = _mm256_set1_pd(coef);
    const __m256d vmu = _mm256_set1_pd(mu[h]);
    const __m256d vhp = _mm256_set1_pd(-half_prec);
    std::size_t g = 0;
    for (; g + kLanes <= num_grid; g += kLanes) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(grid + g), vmu);
      const __m256d e = exp_pd(_mm256_mul_pd(_mm256_mul_pd(vhp, d), d));
      _mm256_storeu_pd(out + g, _mm256_fmadd_pd(vcoef, e, _mm256_loadu_pd(out + g)));
    }
    for (; g < num_grid; ++g) {
      const double d = grid[g] - mu[h];
      out[g] += coef * std::exp(-half_prec * d * d);
    }
  }
}

}  // namespace

const KernelTable& avx2_table_impl() noexcept {
  static const KernelTable table{Isa::Avx2, gaussian_scores, max_value, exp_shifted,
                                 ar1_step,  dot,             mixture_density};
  return table;
}

}  // namespace ar1dp::kernels
