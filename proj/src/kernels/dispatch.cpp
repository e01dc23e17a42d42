#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <string_view>

#include "ar1dp/kernels.hpp"

namespace ar1dp::kernels {

#if defined(AR1DP_HAVE_AVX2)
const KernelTable& avx2_table_impl() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(AR1DP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("AR1DP_SIMD"); env && std::string_view(env) == "scalar")
    return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() noexcept {
#if defined(AR1DP_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool select(Isa isa) noexcept {
  const KernelTable* t = isa == Isa::Scalar ? &scalar_table() : avx2_table();
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

double log_sum_exp(std::span<const double> x) {
  const KernelTable& k = active();
  const double m = k.max_value(x.data(), x.size());
  if (!std::isfinite(m)) return m;
  // Scratch on the stack for the common small case.
  constexpr std::size_t kSmall = 256;
  double small[kSmall];
  std::unique_ptr<double[]> big;
  double* buf = small;
  if (x.size() > kSmall) {
    big = std::make_unique<double[]>(x.size());
    buf = big.get();
  }
  return m + std::log(k.exp_shifted(x.data(), m, buf, x.size()));
}

double normalize_log_weights(std::span<double> x) {
  const KernelTable& k = active();
  const double m = k.max_value(x.data(), x.size());
  if (m == -std::numeric_limits<double>::infinity()) {
    const double u = 1.0 / static_cast<double>(x.size());
    for (double& v : x) v = u;
    return m;
  }
  const double sum = k.exp_shifted(x.data(), m, x.data(), x.size());
  const double inv = 1.0 / sum;
  for (double& v : x) v *= inv;
  return m + std::log(sum);
}

}  // namespace ar1dp::kernels
