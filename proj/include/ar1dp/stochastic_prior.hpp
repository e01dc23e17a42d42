#pragma once

// Latent Gaussian AR(1) sticks, the copula map onto Beta(1, M) stick
// variables, and the two competitor stick recursions (Taddy; DeYoreo-Kottas).

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>

#include "ar1dp/matrix.hpp"
#include "ar1dp/rng.hpp"

namespace ar1dp {

/// Autocorrelation of the latent AR(1); innovation variance is 1 - psi^2 so
/// every epsilon_t is marginally N(0, 1).
class Ar1Params {
 public:
  explicit Ar1Params(double psi);

  [[nodiscard]] double psi() const noexcept { return psi_; }
  [[nodiscard]] double innovation_variance() const noexcept { return 1.0 - psi_ * psi_; }
  [[nodiscard]] double innovation_sd() const noexcept;

 private:
  double psi_;
};

/// Beta(1, M) marginal of the stick variables.
class CopulaSpec {
 public:
  explicit CopulaSpec(double mass);

  [[nodiscard]] double mass() const noexcept { return mass_; }
  [[nodiscard]] static constexpr double a() noexcept { return 1.0; }
  [[nodiscard]] double b() const noexcept { return mass_; }

 private:
  double mass_;
};

/// T x L latent Gaussian paths, one AR(1) realisation per column.
using EpsPath = Matrix<double>;

EpsPath sample_ar1_path(const Ar1Params& params, std::size_t T, std::size_t L, Rng& rng);

/// log N(e_1; 0, 1) + sum_{t >= 2} log N(e_t; psi e_{t-1}, 1 - psi^2).
double ar1_log_density(std::span<const double> path, const Ar1Params& params);

/// Sum of ar1_log_density over every column of a path matrix.
double ar1_log_density(const EpsPath& path, const Ar1Params& params);

/// xi = 1 - (1 - Phi(eps))^(1/M).
double copula_transform(double eps, const CopulaSpec& spec);

/// log(xi) and log(1 - xi) for xi = copula_transform(eps), both without
/// cancellation.
struct LogStick {
  double log_xi;
  double log_one_minus_xi;
};
LogStick copula_transform_log(double eps, const CopulaSpec& spec);

/// Exact inverse of copula_transform. Rejects xi outside (0, 1).
double inverse_copula(double xi, const CopulaSpec& spec);

/// One draw of xi_t given xi_{t-1} under the AR1-DP transition.
double conditional_xi_sample(double xi_prev, double psi, const CopulaSpec& spec, Rng& rng);

/// xi_t = 1 - u (1 - w xi_{t-1}), u ~ Beta(M, 1 - psi), w ~ Beta(psi, 1 - psi).
double taddy_xi_step(double xi_prev, double psi, double mass, Rng& rng);
/// Same recursion with the Beta draws supplied.
double taddy_xi_step(double xi_prev, double u, double w) noexcept;

/// Lag-k autocorrelation of Taddy's sticks: (psi M / (1 + M - psi))^k.
double taddy_autocorrelation(double psi, double mass, std::size_t k);

/// xi = 1 - exp(-(zeta^2 + eta^2) / (2M)).
double dyk_xi(double zeta, double eta, double mass) noexcept;

/// T x L sticks of the DeYoreo-Kottas process: zeta_l ~ N(0,1) once per
/// column, eta columns AR(1; psi).
Matrix<double> dyk_xi_path(double psi, double mass, std::size_t T, std::size_t L, Rng& rng);

// ---------------------------------------------------------------------------
// Common weight-process contract: initial draw, one-step transition, and the
// path log-density where it exists.

enum class WeightProcessKind { Ar1Dp, Taddy, DeYoreoKottas };

std::string_view to_string(WeightProcessKind kind) noexcept;
WeightProcessKind parse_weight_process(std::string_view name);

/// Per-stick latent state. `latent` is epsilon (AR1-DP), xi (Taddy) or eta
/// (DeYoreo-Kottas); `aux` holds the static zeta for DeYoreo-Kottas.
struct StickState {
  double latent = 0.0;
  double aux = 0.0;
};

class Ar1DpProcess {
 public:
  Ar1DpProcess(double psi, double mass) : ar1_(psi), copula_(mass) {}
  StickState initial(Rng& rng) const { return {rng.normal(), 0.0}; }
  void step(StickState& s, Rng& rng) const {
    s.latent = ar1_.psi() * s.latent + ar1_.innovation_sd() * rng.normal();
  }
  [[nodiscard]] double xi(const StickState& s) const { return copula_transform(s.latent, copula_); }
  [[nodiscard]] double path_log_density(std::span<const double> eps) const {
    return ar1_log_density(eps, ar1_);
  }

 private:
  Ar1Params ar1_;
  CopulaSpec copula_;
};

class TaddyProcess {
 public:
  TaddyProcess(double psi, double mass);
  StickState initial(Rng& rng) const { return {rng.beta(1.0, mass_), 0.0}; }
  void step(StickState& s, Rng& rng) const { s.latent = taddy_xi_step(s.latent, psi_, mass_, rng); }
  [[nodiscard]] double xi(const StickState& s) const noexcept { return s.latent; }

 private:
  double psi_;
  double mass_;
};

/// Forward simulation only: xi is not an invertible function of the latents,
/// so no path density is offered.
class DeYoreoKottasProcess {
 public:
  DeYoreoKottasProcess(double psi, double mass) : ar1_(psi), mass_(CopulaSpec(mass).mass()) {}
  StickState initial(Rng& rng) const {
    const double zeta = rng.normal();
    return {rng.normal(), zeta};
  }
  void step(StickState& s, Rng& rng) const {
    s.latent = ar1_.psi() * s.latent + ar1_.innovation_sd() * rng.normal();
  }
  [[nodiscard]] double xi(const StickState& s) const noexcept {
    return dyk_xi(s.aux, s.latent, mass_);
  }

 private:
  Ar1Params ar1_;
  double mass_;
};

using WeightProcess = std::variant<Ar1DpProcess, TaddyProcess, DeYoreoKottasProcess>;

WeightProcess make_weight_process(WeightProcessKind kind, double psi, double mass);

/// T x L stick variables simulated from any process.
Matrix<double> sample_stick_paths(const WeightProcess& process, std::size_t T, std::size_t L,
                                  Rng& rng);

}  // namespace ar1dp
