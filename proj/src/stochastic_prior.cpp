#include "ar1dp/stochastic_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <stdexcept>
#include <string>

#include "ar1dp/normal.hpp"

namespace ar1dp {
namespace {

constexpr double kXiMin = std::numeric_limits<double>::min();
const double kXiMax = std::nextafter(1.0, 0.0);

void check_psi(double psi) {
  if (!(std::fabs(psi) < 1.0))
    throw std::invalid_argument("autocorrelation psi must lie in (-1, 1), got " +
                                std::to_string(psi));
}

void check_mass(double mass) { static_cast<void>(CopulaSpec(mass)); }

void check_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0))
    throw std::invalid_argument(std::string(what) + " must lie in (0, 1), got " +
                                std::to_string(x));
}

}  // namespace

Ar1Params::Ar1Params(double psi) : psi_(psi) { check_psi(psi); }

double Ar1Params::innovation_sd() const noexcept { return std::sqrt(innovation_variance()); }

CopulaSpec::CopulaSpec(double mass) : mass_(mass) {
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw std::invalid_argument("mass M must be positive and finite");
}

EpsPath sample_ar1_path(const Ar1Params& params, std::size_t T, std::size_t L, Rng& rng) {
  if (T == 0 || L == 0) throw std::invalid_argument("sample_ar1_path: T and L must be >= 1");
  EpsPath eps(T, L);
  for (std::size_t l = 0; l < L; ++l) eps(0, l) = rng.normal();
  const double sd = params.innovation_sd();
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t l = 0; l < L; ++l) eps(t, l) = params.psi() * eps(t - 1, l) + sd * rng.normal();
  return eps;
}

double ar1_log_density(std::span<const double> path, const Ar1Params& params) {
  if (path.empty()) throw std::invalid_argument("ar1_log_density: empty path");
  const double var = params.innovation_variance();
  double lp = -kLogSqrt2Pi - 0.5 * path[0] * path[0];
  if (path.size() > 1) {
    double ss = 0.0;
    for (std::size_t t = 1; t < path.size(); ++t) {
      const double d = path[t] - params.psi() * path[t - 1];
      ss += d * d;
    }
    const double steps = static_cast<double>(path.size() - 1);
    lp += -steps * (kLogSqrt2Pi + 0.5 * std::log(var)) - 0.5 * ss / var;
  }
  return lp;
}

double ar1_log_density(const EpsPath& path, const Ar1Params& params) {
  double lp = 0.0;
  for (std::size_t l = 0; l < path.cols(); ++l) {
    const auto column = path.col(l);
    lp += ar1_log_density(column, params);
  }
  return lp;
}

LogStick copula_transform_log(double eps, const CopulaSpec& spec) {
  const double log_rest = log_normal_sf(eps) / spec.mass();
  return {std::log(-std::expm1(log_rest)), log_rest};
}

double copula_transform(double eps, const CopulaSpec& spec) {
  if (!std::isfinite(eps)) throw std::invalid_argument("copula_transform: eps must be finite");
  const double xi = -std::expm1(log_normal_sf(eps) / spec.mass());
  return std::clamp(xi, kXiMin, kXiMax);
}

double inverse_copula(double xi, const CopulaSpec& spec) {
  check_open_unit(xi, "inverse_copula: xi");
  // q = (1 - xi)^M is the upper-tail probability of eps; invert whichever
  // tail keeps full precision.
  const double log_q = spec.mass() * std::log1p(-xi);
  if (log_q <= -std::numbers::ln2) return normal_quantile_upper_log(log_q);
  return normal_quantile(-std::expm1(log_q));
}

double conditional_xi_sample(double xi_prev, double psi, const CopulaSpec& spec, Rng& rng) {
  check_open_unit(xi_prev, "conditional_xi_sample: xi_prev");
  const Ar1Params ar1(psi);
  const double eps_prev = inverse_copula(xi_prev, spec);
  const double z = psi * eps_prev + ar1.innovation_sd() * rng.normal();
  return copula_transform(z, spec);
}

double taddy_xi_step(double xi_prev, double u, double w) noexcept {
  return 1.0 - u * (1.0 - w * xi_prev);
}

double taddy_xi_step(double xi_prev, double psi, double mass, Rng& rng) {
  if (!(psi > 0.0 && psi < 1.0))
    throw std::invalid_argument("Taddy process requires psi in (0, 1)");
  check_mass(mass);
  const double u = rng.beta(mass, 1.0 - psi);
  const double w = rng.beta(psi, 1.0 - psi);
  return taddy_xi_step(xi_prev, u, w);
}

double taddy_autocorrelation(double psi, double mass, std::size_t k) {
  if (!(psi > 0.0 && psi < 1.0))
    throw std::invalid_argument("Taddy process requires psi in (0, 1)");
  check_mass(mass);
  if (k == 0) throw std::invalid_argument("lag k must be >= 1");
  return std::pow(psi * mass / (1.0 + mass - psi), static_cast<double>(k));
}

double dyk_xi(double zeta, double eta, double mass) noexcept {
  return -std::expm1(-(zeta * zeta + eta * eta) / (2.0 * mass));
}

Matrix<double> dyk_xi_path(double psi, double mass, std::size_t T, std::size_t L, Rng& rng) {
  const Ar1Params ar1(psi);
  check_mass(mass);
  if (T == 0 || L == 0) throw std::invalid_argument("dyk_xi_path: T and L must be >= 1");
  std::vector<double> zeta(L);
  for (double& z : zeta) z = rng.normal();
  const EpsPath eta = sample_ar1_path(ar1, T, L, rng);
  Matrix<double> xi(T, L);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t l = 0; l < L; ++l) xi(t, l) = dyk_xi(zeta[l], eta(t, l), mass);
  return xi;
}

std::string_view to_string(WeightProcessKind kind) noexcept {
  switch (kind) {
    case WeightProcessKind::Ar1Dp: return "ar1dp";
    case WeightProcessKind::Taddy: return "taddy";
    case WeightProcessKind::DeYoreoKottas: return "deyoreo-kottas";
  }
  return "unknown";
}

WeightProcessKind parse_weight_process(std::string_view name) {
  if (name == "ar1dp") return WeightProcessKind::Ar1Dp;
  if (name == "taddy") return WeightProcessKind::Taddy;
  if (name == "deyoreo-kottas") return WeightProcessKind::DeYoreoKottas;
  throw std::invalid_argument("unknown weight process '" + std::string(name) +
                              "' (expected ar1dp, taddy or deyoreo-kottas)");
}

TaddyProcess::TaddyProcess(double psi, double mass) : psi_(psi), mass_(CopulaSpec(mass).mass()) {
  if (!(psi > 0.0 && psi < 1.0))
    throw std::invalid_argument("Taddy process requires psi in (0, 1)");
}

WeightProcess make_weight_process(WeightProcessKind kind, double psi, double mass) {
  switch (kind) {
    case WeightProcessKind::Ar1Dp: return Ar1DpProcess(psi, mass);
    case WeightProcessKind::Taddy: return TaddyProcess(psi, mass);
    case WeightProcessKind::DeYoreoKottas: return DeYoreoKottasProcess(psi, mass);
  }
  throw std::invalid_argument("unknown weight process");
}

Matrix<double> sample_stick_paths(const WeightProcess& process, std::size_t T, std::size_t L,
                                  Rng& rng) {
  if (T == 0 || L == 0) throw std::invalid_argument("sample_stick_paths: T and L must be >= 1");
  return std::visit(
      [&](const auto& p) {
        Matrix<double> xi(T, L);
        for (std::size_t l = 0; l < L; ++l) {
          StickState s = p.initial(rng);
          xi(0, l) = p.xi(s);
          for (std::size_t t = 1; t < T; ++t) {
            p.step(s, rng);
            xi(t, l) = p.xi(s);
          }
        }
        return xi;
      },
      process);
}

}  // namespace ar1dp
