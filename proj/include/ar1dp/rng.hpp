#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ar1dp {

/// Seeded generator used by every sampler in the library. All randomness is
/// drawn through one of these so a run is reproducible from its seed on a
/// given platform.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  engine_type& engine() noexcept { return engine_; }

  double uniform() { return unif_(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = unif_(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return norm_(engine_); }
  double normal(double mean, double sd) { return mean + sd * norm_(engine_); }

  /// Gamma with shape/rate parameterisation (mean shape / rate).
  double gamma(double shape, double rate) {
    gamma_.param(std::gamma_distribution<double>::param_type(shape, 1.0));
    return gamma_(engine_) / rate;
  }

  double beta(double a, double b) {
    for (;;) {
      const double x = gamma(a, 1.0);
      const double y = gamma(b, 1.0);
      if (x + y > 0.0) return x / (x + y);
    }
  }

  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Derives an independent stream, e.g. one per chain.
  Rng split() { return Rng(engine_()); }

 private:
  engine_type engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::gamma_distribution<double> gamma_{1.0, 1.0};
};

}  // namespace ar1dp
