#pragma once

// Data-parallel inner loops used by the samplers. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant chosen at
// runtime. The variants agree with the reference to a few ulps; the tests in
// tests/test_kernels.cpp pin that down.

#include <cstddef>
#include <span>
#include <string_view>

namespace ar1dp::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  // out[h] = log_w[h] + log_norm[h] - 0.5 * prec[h] * (y - mu[h])^2
  void (*gaussian_scores)(double y, const double* mu, const double* prec,
                          const double* log_norm, const double* log_w, double* out,
                          std::size_t n);

  double (*max_value)(const double* x, std::size_t n);

  // out[i] = exp(x[i] - shift); returns the sum of out.
  double (*exp_shifted)(const double* x, double shift, double* out, std::size_t n);

  // out[i] = psi * prev[i] + sd * noise[i]
  void (*ar1_step)(const double* prev, const double* noise, double psi, double sd,
                   double* out, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);

  // out[g] += sum_h w[h] * sqrt(prec[h] / 2pi) * exp(-0.5 prec[h] (grid[g] - mu[h])^2)
  void (*mixture_density)(const double* grid, std::size_t num_grid, const double* w,
                          const double* mu, const double* prec, std::size_t num_comp,
                          double* out);
};

const KernelTable& scalar_table() noexcept;

/// AVX2 table, or nullptr when it was not compiled in or the CPU lacks
/// AVX2+FMA.
const KernelTable* avx2_table() noexcept;

/// The table in use. Defaults to the best supported ISA; the environment
/// variable AR1DP_SIMD=scalar forces the reference kernels.
const KernelTable& active() noexcept;

/// Overrides the active table (tests, benchmarking). Returns false if the
/// requested ISA is unavailable.
bool select(Isa isa) noexcept;

// Convenience wrappers over the active table.

/// log(sum(exp(x))), -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);

/// Normalises log-weights in place into probabilities. An all -inf input
/// becomes uniform. Returns log(sum(exp(x))).
double normalize_log_weights(std::span<double> x);

}  // namespace ar1dp::kernels
