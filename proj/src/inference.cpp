#include "ar1dp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ar1dp/kernels.hpp"
#include "ar1dp/normal.hpp"
#include "ar1dp/parallel.hpp"

namespace ar1dp {

// ---------------------------------------------------------------------------
// Priors and configuration

double PsiPrior::log_density(double psi) const {
  if (!(std::fabs(psi) < 1.0)) return -std::numeric_limits<double>::infinity();
  const double u = 0.5 * (psi + 1.0);
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - std::log(2.0) -
         (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

void PsiPrior::validate() const {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("psi prior: shapes must be positive");
}

double MassPrior::log_density(double mass) const {
  if (!(mass > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(mass) -
         rate * mass;
}

void MassPrior::validate() const {
  if (!(shape > 0.0 && rate > 0.0))
    throw std::invalid_argument("mass prior: shape and rate must be positive");
}

void PriorSpec::validate() const {
  base.validate();
  psi_prior.validate();
  mass_prior.validate();
  if (truncation < 2) throw std::invalid_argument("prior: truncation J must be >= 2");
  if (!(regression_prior_variance > 0.0))
    throw std::invalid_argument("prior: regression prior variance must be positive");
}

std::string_view to_string(ResamplingScheme scheme) noexcept {
  return scheme == ResamplingScheme::Multinomial ? "multinomial" : "systematic";
}

ResamplingScheme parse_resampling(std::string_view name) {
  if (name == "multinomial") return ResamplingScheme::Multinomial;
  if (name == "systematic") return ResamplingScheme::Systematic;
  throw std::invalid_argument("unknown resampling scheme '" + std::string(name) +
                              "' (expected multinomial or systematic)");
}

void MCMCConfig::validate() const {
  if (iterations == 0) throw std::invalid_argument("mcmc: iterations must be >= 1");
  if (!(burn_in < iterations)) throw std::invalid_argument("mcmc: burn_in must be < iterations");
  if (thin == 0) throw std::invalid_argument("mcmc: thin must be >= 1");
  if (num_particles < 2) throw std::invalid_argument("mcmc: need at least 2 particles");
  if (!(psi_proposal_sd > 0.0)) throw std::invalid_argument("mcmc: psi proposal sd must be > 0");
  if (!(mass_proposal_sd > 0.0)) throw std::invalid_argument("mcmc: M proposal sd must be > 0");
  if (!(target_psi_acceptance > 0.0 && target_psi_acceptance < 1.0))
    throw std::invalid_argument("mcmc: target acceptance must lie in (0, 1)");
  if (threads == 0) throw std::invalid_argument("mcmc: threads must be >= 1");
}

std::string_view to_string(LatentBlocking blocking) noexcept {
  return blocking == LatentBlocking::Stick ? "stick" : "joint";
}

LatentBlocking parse_latent_blocking(std::string_view name) {
  if (name == "stick") return LatentBlocking::Stick;
  if (name == "joint") return LatentBlocking::Joint;
  throw std::invalid_argument("unknown latent blocking '" + std::string(name) +
                              "' (expected stick or joint)");
}

MCMCConfig MCMCConfig::applications() { return MCMCConfig{}; }

MCMCConfig MCMCConfig::simulation() {
  MCMCConfig c;
  c.iterations = 50000;
  c.burn_in = 25000;
  c.thin = 10;
  return c;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

void check_weights(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("resample: empty weight vector");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("resample: weights must be non-negative");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-8) throw std::invalid_argument("resample: weights must sum to 1");
}

std::vector<double> cumulative(std::span<const double> weights) {
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  return cdf;
}

std::size_t search(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i >= cdf.size()) {
    // u beyond the rounded total: last index with positive mass.
    i = cdf.size() - 1;
    while (i > 0 && cdf[i] == cdf[i - 1]) --i;
  }
  return i;
}

}  // namespace

std::vector<std::size_t> multinomial_resample(std::span<const double> weights, std::size_t count,
                                              Rng& rng) {
  check_weights(weights);
  const auto cdf = cumulative(weights);
  std::vector<std::size_t> out(count);
  for (auto& idx : out) idx = search(cdf, rng.uniform() * cdf.back());
  return out;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             Rng& rng) {
  check_weights(weights);
  const auto cdf = cumulative(weights);
  std::vector<std::size_t> out(count);
  const double step = cdf.back() / static_cast<double>(count);
  const double start = rng.uniform() * step;
  for (std::size_t i = 0; i < count; ++i) out[i] = search(cdf, start + step * static_cast<double>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Conditional SMC

EpsPath ParticleSystem::trajectory(std::size_t final_index,
                                   std::vector<std::size_t>& lineage_out) const {
  EpsPath path(T, L);
  lineage_out.assign(T, 0);
  std::size_t b = final_index;
  for (std::size_t t = T; t-- > 0;) {
    lineage_out[t] = b;
    const auto row = eps[t].row(b);
    std::copy(row.begin(), row.end(), path.row(t).begin());
    if (t > 0) b = ancestors(t - 1, b);
  }
  return path;
}

CsmcResult conditional_smc(const Matrix<double>& counts, double psi, double mass,
                           const EpsPath& retained, std::span<const std::size_t> retained_lineage,
                           std::size_t num_particles, Rng& rng, const SmcOptions& options) {
  const Ar1Params ar1(psi);
  const CopulaSpec copula(mass);
  const std::size_t T = retained.rows();
  const std::size_t L = retained.cols();
  const std::size_t R = num_particles;
  if (R == 0) throw std::invalid_argument("conditional_smc: need at least one particle");
  if (T == 0 || L == 0) throw std::invalid_argument("conditional_smc: empty retained path");
  if (counts.rows() != T || counts.cols() != L + 1)
    throw std::invalid_argument("conditional_smc: counts must be T x J with J = L + 1");
  for (double v : retained.storage())
    if (!std::isfinite(v)) throw std::invalid_argument("conditional_smc: non-finite reference");

  ParticleSystem sys;
  sys.num_particles = R;
  sys.T = T;
  sys.L = L;
  sys.eps.assign(T, Matrix<double>(R, L));
  sys.log_weights = Matrix<double>(T, R);
  sys.weights = Matrix<double>(T, R);
  sys.ancestors = Matrix<std::size_t>(T > 1 ? T - 1 : 0, R);
  if (retained_lineage.empty()) {
    sys.lineage.assign(T, 0);
  } else {
    if (retained_lineage.size() != T)
      throw std::invalid_argument("conditional_smc: lineage length must equal T");
    sys.lineage.assign(retained_lineage.begin(), retained_lineage.end());
    for (std::size_t b : sys.lineage)
      if (b >= R) throw std::invalid_argument("conditional_smc: lineage index out of range");
  }

  const auto& k = kernels::active();
  const double sd = ar1.innovation_sd();
  std::vector<double> noise(L);

  auto weigh = [&](std::size_t t) {
    const auto c = counts.row(t);
    const Matrix<double>& e = sys.eps[t];
    parallel_for(R, options.threads, [&](std::size_t r) {
      sys.log_weights(t, r) = allocation_log_likelihood(e.row(r), c, mass);
    });
    for (double v : sys.log_weights.row(t))
      if (std::isnan(v)) throw std::runtime_error("conditional_smc: NaN particle weight");
    auto w = sys.weights.row(t);
    std::copy(sys.log_weights.row(t).begin(), sys.log_weights.row(t).end(), w.begin());
    kernels::normalize_log_weights(w);
  };

  // t = 1: fresh N(0, 1) particles except the reference slot.
  {
    const std::size_t b = sys.lineage[0];
    for (std::size_t r = 0; r < R; ++r) {
      auto row = sys.eps[0].row(r);
      if (r == b) {
        std::copy(retained.row(0).begin(), retained.row(0).end(), row.begin());
      } else {
        for (double& v : row) v = rng.normal();
      }
    }
    weigh(0);
  }

  std::vector<std::size_t> parents;
  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t b = sys.lineage[t];
    const auto prev_w = sys.weights.row(t - 1);
    parents = options.resampling == ResamplingScheme::Multinomial
                  ? multinomial_resample(prev_w, R - 1, rng)
                  : systematic_resample(prev_w, R - 1, rng);
    std::size_t next = 0;
    for (std::size_t r = 0; r < R; ++r) {
      auto row = sys.eps[t].row(r);
      if (r == b) {
        sys.ancestors(t - 1, r) = sys.lineage[t - 1];
        std::copy(retained.row(t).begin(), retained.row(t).end(), row.begin());
        continue;
      }
      const std::size_t a = parents[next++];
      sys.ancestors(t - 1, r) = a;
      for (double& z : noise) z = rng.normal();
      k.ar1_step(sys.eps[t - 1].row(a).data(), noise.data(), ar1.psi(), sd, row.data(), L);
    }
    weigh(t);
  }

  const auto final_w = sys.weights.row(T - 1);
  const std::size_t pick = multinomial_resample(final_w, 1, rng)[0];
  CsmcResult out;
  out.path = sys.trajectory(pick, out.lineage);
  out.system = std::move(sys);
  return out;
}

CsmcResult conditional_smc(const AllocationState& alloc, double psi, double mass,
                           const EpsPath& retained, std::span<const std::size_t> retained_lineage,
                           std::size_t num_particles, Rng& rng, const SmcOptions& options) {
  return conditional_smc(allocation_counts(alloc, retained.cols() + 1), psi, mass, retained,
                         retained_lineage, num_particles, rng, options);
}

StickCsmcResult conditional_smc_by_stick(const Matrix<double>& counts, double psi, double mass,
                                         const EpsPath& retained,
                                         const Matrix<std::size_t>& retained_lineage,
                                         std::size_t num_particles, Rng& rng,
                                         const SmcOptions& options) {
  const std::size_t T = retained.rows();
  const std::size_t L = retained.cols();
  if (T == 0 || L == 0) throw std::invalid_argument("conditional_smc_by_stick: empty retained path");
  if (counts.rows() != T || counts.cols() != L + 1)
    throw std::invalid_argument("conditional_smc_by_stick: counts must be T x J with J = L + 1");
  const bool have_lineage = retained_lineage.rows() * retained_lineage.cols() > 0;
  if (have_lineage && (retained_lineage.rows() != T || retained_lineage.cols() != L))
    throw std::invalid_argument("conditional_smc_by_stick: lineage must be T x (J-1)");

  const Ar1Params ar1(psi);
  StickCsmcResult out{EpsPath(T, L), Matrix<std::size_t>(T, L, 0), 0.0};
  Matrix<double> stick_counts(T, 2);
  EpsPath column(T, 1);
  std::vector<std::size_t> lineage(T, 0);
  const std::vector<bool> informative = informative_sticks(counts);
  for (std::size_t l = 0; l < L; ++l) {
    if (!informative[l]) {
      const EpsPath fresh = sample_ar1_path(ar1, T, 1, rng);
      for (std::size_t t = 0; t < T; ++t) out.path(t, l) = fresh(t, 0);
      continue;
    }
    for (std::size_t t = 0; t < T; ++t) {
      double above = 0.0;
      for (std::size_t h = l + 1; h <= L; ++h) above += counts(t, h);
      stick_counts(t, 0) = counts(t, l);
      stick_counts(t, 1) = above;
      column(t, 0) = retained(t, l);
      lineage[t] = have_lineage ? retained_lineage(t, l) : 0;
    }
    const CsmcResult r =
        conditional_smc(stick_counts, psi, mass, column, lineage, num_particles, rng, options);
    out.log_evidence += smc_marginal_likelihood(r.system);
    for (std::size_t t = 0; t < T; ++t) {
      out.path(t, l) = r.path(t, 0);
      out.lineage(t, l) = r.lineage[t];
    }
  }
  return out;
}

double smc_marginal_likelihood(const ParticleSystem& system) {
  const double log_r = std::log(static_cast<double>(system.num_particles));
  double total = 0.0;
  for (std::size_t t = 0; t < system.T; ++t)
    total += kernels::log_sum_exp(system.log_weights.row(t)) - log_r;
  return total;
}

// ---------------------------------------------------------------------------
// Single-block updates

void ChainState::refresh_weights() { weights = weights_from_eps(eps, mass); }

namespace {

// log(Phi(b) - Phi(a)) for a < b, evaluated on whichever tail is accurate.
double log_normal_interval(double a, double b) {
  if (a > 0.0) return std::log(normal_sf(a) - normal_sf(b));
  return std::log(normal_cdf(b) - normal_cdf(a));
}

}  // namespace

double truncated_normal_sample(double mean, double sd, double lo, double hi, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double x = rng.normal(mean, sd);
    if (x > lo && x < hi) return x;
  }
  // Far-tail fallback: inverse CDF on the truncated interval.
  const double a = normal_cdf((lo - mean) / sd);
  const double b = normal_cdf((hi - mean) / sd);
  const double x = mean + sd * normal_quantile(a + rng.uniform_open() * (b - a));
  return std::clamp(x, std::nextafter(lo, hi), std::nextafter(hi, lo));
}

double truncated_normal_log_density(double x, double mean, double sd, double lo, double hi) {
  if (!(x > lo && x < hi)) return -std::numeric_limits<double>::infinity();
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z -
         log_normal_interval((lo - mean) / sd, (hi - mean) / sd);
}

std::vector<bool> informative_sticks(const Matrix<double>& counts) {
  const std::size_t L = counts.cols() > 0 ? counts.cols() - 1 : 0;
  std::vector<bool> out(L, false);
  for (std::size_t t = 0; t < counts.rows(); ++t) {
    // Columns up to the last occupied component see an observation at or above.
    std::size_t last = counts.cols();
    while (last > 0 && counts(t, last - 1) == 0.0) --last;
    for (std::size_t l = 0; l < std::min(last, L); ++l) out[l] = true;
  }
  return out;
}

double psi_log_acceptance(const EpsPath& eps, double psi, double psi_star, double proposal_sd,
                          const PsiPrior& prior) {
  if (psi_star == psi) return 0.0;
  return prior.log_density(psi_star) - prior.log_density(psi) +
         ar1_log_density(eps, Ar1Params(psi_star)) - ar1_log_density(eps, Ar1Params(psi)) +
         truncated_normal_log_density(psi, psi_star, proposal_sd, -1.0, 1.0) -
         truncated_normal_log_density(psi_star, psi, proposal_sd, -1.0, 1.0);
}

MhResult pmmh_update_psi(const ChainState& state, const PsiPrior& prior, double proposal_sd,
                         Rng& rng) {
  const double psi_star = truncated_normal_sample(state.psi, proposal_sd, -1.0, 1.0, rng);
  const double log_ratio =
      psi_log_acceptance(state.eps, state.psi, psi_star, proposal_sd, prior);
  const bool accept = log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio;
  return {accept ? psi_star : state.psi, accept, log_ratio};
}

double mass_log_acceptance(const EpsPath& eps, const Matrix<double>& counts, double mass,
                           double mass_star, const MassPrior& prior) {
  if (mass_star == mass) return 0.0;
  double ll = 0.0;
  for (std::size_t t = 0; t < eps.rows(); ++t)
    ll += allocation_log_likelihood(eps.row(t), counts.row(t), mass_star) -
          allocation_log_likelihood(eps.row(t), counts.row(t), mass);
  return prior.log_density(mass_star) - prior.log_density(mass) + ll + std::log(mass_star) -
         std::log(mass);
}

MhResult update_mass_M(const ChainState& state, const Matrix<double>& counts,
                       const MassPrior& prior, double proposal_sd, Rng& rng) {
  const double mass_star = state.mass * std::exp(proposal_sd * rng.normal());
  const double log_ratio = mass_log_acceptance(state.eps, counts, state.mass, mass_star, prior);
  const bool accept = log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio;
  return {accept ? mass_star : state.mass, accept, log_ratio};
}

// ---------------------------------------------------------------------------
// Label swaps

double label_swap_log_acceptance(const EpsPath& eps, const Matrix<double>& counts, double mass,
                                 std::size_t h, std::size_t h2, LabelSwapKind kind) {
  const std::size_t J = counts.cols();
  if (h >= J || h2 >= J) throw std::invalid_argument("label_swap_log_acceptance: index out of range");
  if (kind == LabelSwapKind::WithPaths && (h + 1 >= J || h2 + 1 >= J))
    throw std::invalid_argument("label_swap_log_acceptance: path swaps need h, h' < J - 1");
  if (h == h2) return 0.0;
  std::vector<double> c(J), e(eps.cols());
  double ratio = 0.0;
  for (std::size_t t = 0; t < counts.rows(); ++t) {
    if (counts(t, h) == counts(t, h2) && kind == LabelSwapKind::Plain) continue;
    std::copy(counts.row(t).begin(), counts.row(t).end(), c.begin());
    std::copy(eps.row(t).begin(), eps.row(t).end(), e.begin());
    std::swap(c[h], c[h2]);
    if (kind == LabelSwapKind::WithPaths) std::swap(e[h], e[h2]);
    const double now = allocation_log_likelihood(eps.row(t), counts.row(t), mass);
    const double next = allocation_log_likelihood(e, c, mass);
    if (!std::isfinite(next)) return -std::numeric_limits<double>::infinity();
    ratio += next - now;
  }
  return ratio;
}

std::size_t label_swap_moves(ChainState& s, std::size_t attempts, Rng& rng) {
  const std::size_t J = s.comps.size();
  Matrix<double> counts = allocation_counts(s.alloc, J);
  std::vector<double> total(J, 0.0);
  for (std::size_t t = 0; t < counts.rows(); ++t)
    for (std::size_t h = 0; h < J; ++h) total[h] += counts(t, h);

  std::size_t accepted = 0;
  std::vector<std::size_t> occupied;
  for (LabelSwapKind kind : {LabelSwapKind::Plain, LabelSwapKind::WithPaths}) {
    const std::size_t range = kind == LabelSwapKind::Plain ? J : J - 1;
    if (range < 2) continue;
    for (std::size_t a = 0; a < attempts; ++a) {
      occupied.clear();
      for (std::size_t h = 0; h < range; ++h)
        if (total[h] > 0.0) occupied.push_back(h);
      if (occupied.empty()) break;
      const std::size_t h = occupied[rng.uniform_index(occupied.size())];
      std::size_t h2 = rng.uniform_index(range - 1);
      if (h2 >= h) ++h2;
      const double log_ratio = label_swap_log_acceptance(s.eps, counts, s.mass, h, h2, kind);
      if (!(log_ratio >= 0.0 || std::log(rng.uniform_open()) < log_ratio)) continue;
      ++accepted;
      std::swap(s.comps[h], s.comps[h2]);
      std::swap(total[h], total[h2]);
      const int a1 = static_cast<int>(h), a2 = static_cast<int>(h2);
      for (std::size_t t = 0; t < s.alloc.rows(); ++t) {
        std::swap(counts(t, h), counts(t, h2));
        for (int& v : s.alloc.row(t)) v = v == a1 ? a2 : v == a2 ? a1 : v;
      }
      if (kind == LabelSwapKind::WithPaths)
        for (std::size_t t = 0; t < s.eps.rows(); ++t) {
          std::swap(s.eps(t, h), s.eps(t, h2));
          if (s.lineage.rows() == s.eps.rows() && s.lineage.cols() == s.eps.cols())
            std::swap(s.lineage(t, h), s.lineage(t, h2));
        }
    }
  }
  s.refresh_weights();
  return accepted;
}

// ---------------------------------------------------------------------------
// Full sampler

std::vector<double> Trace::psi_draws() const {
  std::vector<double> v;
  v.reserve(draws.size());
  for (const auto& d : draws) v.push_back(d.psi);
  return v;
}

std::vector<double> Trace::mass_draws() const {
  std::vector<double> v;
  v.reserve(draws.size());
  for (const auto& d : draws) v.push_back(d.mass);
  return v;
}

ChainState initialize_chain(const Dataset& data, const PriorSpec& prior, Rng& rng) {
  const std::size_t T = data.num_times();
  const std::size_t J = prior.truncation;
  ChainState s;
  s.psi = 0.0;
  s.mass = prior.mass_prior.mean();
  s.eps = sample_ar1_path(Ar1Params(0.0), T, J - 1, rng);
  s.refresh_weights();
  s.comps.resize(J);
  for (auto& c : s.comps) c = sample_from_base(prior.base, rng);
  s.reg = data.has_covariates()
              ? RegressionState::zeros(T, data.num_covariates(), prior.regression_prior_variance)
              : RegressionState{};
  s.alloc = sample_allocations(data, s.weights, s.comps, s.reg, prior.base, rng);
  s.lineage = Matrix<std::size_t>(T, J - 1, 0);
  return s;
}

SweepStats gibbs_sweep(ChainState& s, const Dataset& data, const PriorSpec& prior,
                       const MCMCConfig& config, double psi_proposal_sd, Rng& rng) {
  const std::size_t J = prior.truncation;
  SweepStats stats;

  s.comps = update_components(s.alloc, data, s.reg, prior.base, J, rng);
  s.alloc = sample_allocations(data, s.weights, s.comps, s.reg, prior.base, rng);
  if (config.label_swaps > 0) label_swap_moves(s, config.label_swaps, rng);
  const Matrix<double> counts = allocation_counts(s.alloc, J);

  const MhResult psi = pmmh_update_psi(s, prior.psi_prior, psi_proposal_sd, rng);
  s.psi = psi.value;
  stats.psi_accepted = psi.accepted;

  const SmcOptions smc_options{config.resampling, config.threads};
  if (config.latent_blocking == LatentBlocking::Stick) {
    StickCsmcResult smc = conditional_smc_by_stick(counts, s.psi, s.mass, s.eps, s.lineage,
                                                   config.num_particles, rng, smc_options);
    s.eps = std::move(smc.path);
    s.lineage = std::move(smc.lineage);
  } else {
    // The joint pass keeps one lineage for the whole vector; store it in
    // every column.
    std::vector<std::size_t> joint(s.eps.rows(), 0);
    if (s.lineage.rows() == s.eps.rows() && s.lineage.cols() > 0)
      for (std::size_t t = 0; t < joint.size(); ++t) joint[t] = s.lineage(t, 0);
    CsmcResult smc = conditional_smc(counts, s.psi, s.mass, s.eps, joint, config.num_particles,
                                     rng, smc_options);
    s.eps = std::move(smc.path);
    s.lineage = Matrix<std::size_t>(s.eps.rows(), s.eps.cols());
    for (std::size_t t = 0; t < s.eps.rows(); ++t)
      for (std::size_t l = 0; l < s.eps.cols(); ++l) s.lineage(t, l) = smc.lineage[t];
  }

  const MhResult mass = update_mass_M(s, counts, prior.mass_prior, config.mass_proposal_sd, rng);
  s.mass = mass.value;
  stats.mass_accepted = mass.accepted;
  s.refresh_weights();

  s.reg = update_regression(data, s.alloc, s.comps, s.reg, prior.base, rng);
  return stats;
}

RunResult run_mcmc(const Dataset& data, const PriorSpec& prior, const MCMCConfig& config,
                   const ProgressCallback& progress) {
  prior.validate();
  config.validate();
  if (prior.process != WeightProcessKind::Ar1Dp)
    throw std::invalid_argument(
        "run_mcmc: posterior inference is implemented for the ar1dp process only");
  if (data.num_times() == 0) throw std::invalid_argument("run_mcmc: dataset has no time points");

  Rng rng(config.seed);
  RunResult result;
  Trace& trace = result.trace;
  trace.T = data.num_times();
  trace.n = data.num_units();
  trace.J = prior.truncation;
  trace.p = data.num_covariates();
  trace.base = prior.base;
  trace.seed = config.seed;
  trace.config_hash = config_fingerprint(prior, config);
  trace.draws.reserve(config.retained_draws());
  result.log.reserve(config.iterations);

  ChainState state = initialize_chain(data, prior, rng);
  double log_sd = std::log(config.psi_proposal_sd);
  std::size_t psi_acc = 0, mass_acc = 0;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double sd = std::exp(log_sd);
    const SweepStats st = gibbs_sweep(state, data, prior, config, sd, rng);
    psi_acc += st.psi_accepted;
    mass_acc += st.mass_accepted;
    result.log.push_back({it, state.psi, st.psi_accepted, sd, state.mass, st.mass_accepted});

    if (config.adapt_psi_proposal && it < config.burn_in) {
      // Robbins-Monro on log sd; frozen once burn-in ends.
      const double gain = 1.0 / std::pow(static_cast<double>(it) + 1.0, 0.6);
      log_sd += gain * ((st.psi_accepted ? 1.0 : 0.0) - config.target_psi_acceptance);
      log_sd = std::clamp(log_sd, std::log(1e-3), std::log(2.0));
    }

    if (it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0) {
      TraceDraw d;
      d.iteration = it;
      d.psi = state.psi;
      d.mass = state.mass;
      d.alloc = state.alloc;
      d.comps = state.comps;
      d.beta = state.reg.beta;
      d.weights = state.weights;
      trace.draws.push_back(std::move(d));
    }
    if (progress) progress(it, state);
  }

  const double iters = static_cast<double>(config.iterations);
  result.psi_acceptance_rate = static_cast<double>(psi_acc) / iters;
  result.mass_acceptance_rate = static_cast<double>(mass_acc) / iters;
  result.final_state = std::move(state);
  return result;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_fingerprint(const PriorSpec& prior, const MCMCConfig& config) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(prior.process) << ';' << prior.base.mu0 << ';' << prior.base.lambda0 << ';'
     << prior.base.alpha << ';' << prior.base.beta << ';' << prior.base.kernel_lambda << ';'
     << prior.psi_prior.a << ';' << prior.psi_prior.b << ';' << prior.mass_prior.shape << ';'
     << prior.mass_prior.rate << ';' << prior.truncation << ';'
     << prior.regression_prior_variance << ';' << config.iterations << ';' << config.burn_in
     << ';' << config.thin << ';' << config.num_particles << ';' << config.psi_proposal_sd << ';'
     << config.adapt_psi_proposal << ';' << config.target_psi_acceptance << ';'
     << config.mass_proposal_sd << ';' << to_string(config.resampling) << ';'
     << to_string(config.latent_blocking) << ';' << config.label_swaps << ';' << config.seed;
  return fnv1a_hex(os.str());
}

}  // namespace ar1dp
