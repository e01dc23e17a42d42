#pragma once

namespace ar1dp {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

/// Standard normal CDF via erfc, accurate in both tails.
double normal_cdf(double x) noexcept;

/// Upper tail 1 - Phi(x), computed without cancellation.
double normal_sf(double x) noexcept;

/// log(1 - Phi(x)), finite for every finite x.
double log_normal_sf(double x) noexcept;

/// Inverse standard normal CDF. The argument is clamped to
/// [1e-15, 1 - 1e-15] so the result is always finite.
double normal_quantile(double p) noexcept;

/// Returns x with 1 - Phi(x) = q, i.e. -normal_quantile(q), with the same clamp.
double normal_quantile_upper(double q) noexcept;

/// Returns x with log(1 - Phi(x)) = log_q. Not clamped: stays exact when q
/// itself underflows.
double normal_quantile_upper_log(double log_q) noexcept;

/// log N(x; mean, variance).
double normal_logpdf(double x, double mean, double variance) noexcept;

}  // namespace ar1dp
