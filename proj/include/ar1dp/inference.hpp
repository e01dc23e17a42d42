#pragma once

// Posterior sampler for the AR1-DP mixture: blocked Gibbs over components
// and allocations, a Metropolis step for psi with the latent paths held
// fixed, conditional SMC for the latent paths, and a log-scale random walk
// for the mass M.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ar1dp/matrix.hpp"
#include "ar1dp/mixture_model.hpp"
#include "ar1dp/random_measure.hpp"
#include "ar1dp/rng.hpp"
#include "ar1dp/stochastic_prior.hpp"

namespace ar1dp {

/// Beta(a, b) rescaled to (-1, 1); a = b = 1 is Uniform(-1, 1).
struct PsiPrior {
  double a = 1.0;
  double b = 1.0;
  [[nodiscard]] double log_density(double psi) const;
  void validate() const;
};

/// Gamma(shape, rate) prior on the DP mass.
struct MassPrior {
  double shape = 4.0;
  double rate = 4.0;
  [[nodiscard]] double log_density(double mass) const;
  [[nodiscard]] double mean() const noexcept { return shape / rate; }
  void validate() const;
};

struct PriorSpec {
  WeightProcessKind process = WeightProcessKind::Ar1Dp;
  BaseMeasure base;
  PsiPrior psi_prior;
  MassPrior mass_prior;
  std::size_t truncation = kDefaultTruncation;
  double regression_prior_variance = 10.0;

  void validate() const;
};

enum class ResamplingScheme { Multinomial, Systematic };

std::string_view to_string(ResamplingScheme scheme) noexcept;
ResamplingScheme parse_resampling(std::string_view name);

/// How the latent paths are refreshed: one conditional SMC per stick column
/// (default) or a single pass over the whole (J-1)-vector.
enum class LatentBlocking { Stick, Joint };

std::string_view to_string(LatentBlocking blocking) noexcept;
LatentBlocking parse_latent_blocking(std::string_view name);

struct MCMCConfig {
  std::size_t iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 10;
  std::size_t num_particles = 500;
  double psi_proposal_sd = 0.3;
  bool adapt_psi_proposal = true;
  double target_psi_acceptance = 0.3;
  double mass_proposal_sd = 0.5;
  ResamplingScheme resampling = ResamplingScheme::Multinomial;
  LatentBlocking latent_blocking = LatentBlocking::Stick;
  std::size_t label_swaps = 10;  // proposals of each swap kind per sweep
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
  [[nodiscard]] std::size_t retained_draws() const noexcept {
    return (iterations - burn_in) / thin;
  }

  /// 20,000 iterations, 10,000 burn-in, thin 10.
  static MCMCConfig applications();
  /// 50,000 iterations, 25,000 burn-in, thin 10.
  static MCMCConfig simulation();
};

// ---------------------------------------------------------------------------
// Particle machinery

/// i.i.d. categorical draws of ancestor indices.
std::vector<std::size_t> multinomial_resample(std::span<const double> weights, std::size_t count,
                                              Rng& rng);
/// Single-uniform stratified draws.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             Rng& rng);

struct ParticleSystem {
  std::size_t num_particles = 0;
  std::size_t T = 0;
  std::size_t L = 0;
  std::vector<Matrix<double>> eps;   // per time: R x L particle values
  Matrix<double> log_weights;        // T x R unnormalised log omega_t
  Matrix<double> weights;            // T x R normalised omega~_t
  Matrix<std::size_t> ancestors;     // (T-1) x R: parent at t of particle r at t+1
  std::vector<std::size_t> lineage;  // reference lineage B_1..B_T used in this pass

  /// Trajectory ending in particle `final_index` at time T, and its lineage.
  [[nodiscard]] EpsPath trajectory(std::size_t final_index,
                                   std::vector<std::size_t>& lineage_out) const;
};

struct SmcOptions {
  ResamplingScheme resampling = ResamplingScheme::Multinomial;
  std::size_t threads = 1;
};

struct CsmcResult {
  ParticleSystem system;
  EpsPath path;
  std::vector<std::size_t> lineage;
};

/// Conditional SMC targeting p_psi(eps_{1:T} | s_{1:T}) with the prior as
/// proposal. `counts` is the T x J component occupancy; `retained` the
/// reference path (T x (J-1)), kept in slots retained_lineage[t].
CsmcResult conditional_smc(const Matrix<double>& counts, double psi, double mass,
                           const EpsPath& retained, std::span<const std::size_t> retained_lineage,
                           std::size_t num_particles, Rng& rng, const SmcOptions& options = {});

CsmcResult conditional_smc(const AllocationState& alloc, double psi, double mass,
                           const EpsPath& retained, std::span<const std::size_t> retained_lineage,
                           std::size_t num_particles, Rng& rng, const SmcOptions& options = {});

/// sum_t log((1/R) sum_r omega_t^r): the particle estimate of log p_psi(s_{1:T}).
double smc_marginal_likelihood(const ParticleSystem& system);

struct StickCsmcResult {
  EpsPath path;
  Matrix<std::size_t> lineage;  // T x (J-1)
  double log_evidence = 0.0;    // sum of the per-stick particle estimates
};

/// Conditional SMC run separately on every stick column. Given the
/// allocations, sum_h c_h log w_h = sum_l [c_l log xi_l + c_{>l} log(1 - xi_l)]
/// and the AR(1) columns are independent a priori, so the target factorises
/// over sticks and each column is a one-dimensional problem with counts
/// (c_l, c_{>l}). Columns with no observation at or above them at any time are
/// drawn exactly from the AR(1) prior. An empty lineage means slot 0.
StickCsmcResult conditional_smc_by_stick(const Matrix<double>& counts, double psi, double mass,
                                         const EpsPath& retained,
                                         const Matrix<std::size_t>& retained_lineage,
                                         std::size_t num_particles, Rng& rng,
                                         const SmcOptions& options = {});

// ---------------------------------------------------------------------------
// Chain state and single-block updates

struct ChainState {
  EpsPath eps;
  WeightMatrix weights;
  ComponentParams comps;
  AllocationState alloc;
  RegressionState reg;
  double psi = 0.0;
  double mass = 1.0;
  Matrix<std::size_t> lineage;  // T x (J-1) reference slots

  /// weights <- stick_break(copula_transform(eps, mass)).
  void refresh_weights();
};

double truncated_normal_sample(double mean, double sd, double lo, double hi, Rng& rng);
double truncated_normal_log_density(double x, double mean, double sd, double lo, double hi);

struct MhResult {
  double value;
  bool accepted;
  double log_ratio;
};

/// Stick columns with an observation at or above them at some time. The rest
/// carry no likelihood.
std::vector<bool> informative_sticks(const Matrix<double>& counts);

/// Log acceptance ratio of psi -> psi_star with eps fixed.
double psi_log_acceptance(const EpsPath& eps, double psi, double psi_star, double proposal_sd,
                          const PsiPrior& prior);

/// Truncated-normal random walk on psi with the latent paths held fixed. The
/// caller follows up with conditional SMC at the returned psi.
MhResult pmmh_update_psi(const ChainState& state, const PsiPrior& prior, double proposal_sd,
                         Rng& rng);

/// Log acceptance ratio of mass -> mass_star (including the log-walk Jacobian).
double mass_log_acceptance(const EpsPath& eps, const Matrix<double>& counts, double mass,
                           double mass_star, const MassPrior& prior);

/// Random walk on log M; eps held fixed so the weights move with M.
MhResult update_mass_M(const ChainState& state, const Matrix<double>& counts,
                       const MassPrior& prior, double proposal_sd, Rng& rng);

/// Relabelling moves on the stick-breaking order. Plain exchanges components
/// h and h' (atoms and allocations) with eps fixed; WithPaths also exchanges
/// eps columns h and h' (both below J-1). Atoms are iid under G0 and the
/// columns iid under the AR(1) prior, so only the allocation term enters.
enum class LabelSwapKind { Plain, WithPaths };

double label_swap_log_acceptance(const EpsPath& eps, const Matrix<double>& counts, double mass,
                                 std::size_t h, std::size_t h2, LabelSwapKind kind);

/// `attempts` proposals of each kind: h uniform over occupied components, h'
/// uniform over the rest of the range. Keeps weights coherent. Returns the
/// number accepted.
std::size_t label_swap_moves(ChainState& state, std::size_t attempts, Rng& rng);

// ---------------------------------------------------------------------------
// Full sampler

struct TraceDraw {
  std::size_t iteration = 0;
  double psi = 0.0;
  double mass = 0.0;
  AllocationState alloc;   // T x n
  ComponentParams comps;   // J
  Matrix<double> beta;     // T x p
  WeightMatrix weights;    // T x J
};

struct Trace {
  std::size_t T = 0;
  std::size_t n = 0;
  std::size_t J = 0;
  std::size_t p = 0;
  BaseMeasure base;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<TraceDraw> draws;

  [[nodiscard]] std::vector<double> psi_draws() const;
  [[nodiscard]] std::vector<double> mass_draws() const;
};

struct IterationLog {
  std::size_t iteration;
  double psi;
  bool psi_accepted;
  double psi_proposal_sd;
  double mass;
  bool mass_accepted;
};

struct RunResult {
  Trace trace;
  std::vector<IterationLog> log;
  double psi_acceptance_rate = 0.0;
  double mass_acceptance_rate = 0.0;
  ChainState final_state;
};

/// Overdispersed but seed-determined starting point: eps from the psi = 0
/// prior, M at its prior mean, theta from G0, one allocation pass, beta = 0.
ChainState initialize_chain(const Dataset& data, const PriorSpec& prior, Rng& rng);

struct SweepStats {
  bool psi_accepted = false;
  bool mass_accepted = false;
};

/// One Gibbs sweep in the order: components, allocations, label swaps, psi,
/// latent paths (conditional SMC, blocked as config.latent_blocking), mass,
/// regression.
SweepStats gibbs_sweep(ChainState& state, const Dataset& data, const PriorSpec& prior,
                       const MCMCConfig& config, double psi_proposal_sd, Rng& rng);

using ProgressCallback = std::function<void(std::size_t iteration, const ChainState&)>;

RunResult run_mcmc(const Dataset& data, const PriorSpec& prior, const MCMCConfig& config,
                   const ProgressCallback& progress = {});

/// Stable hex fingerprint of a prior/config pair.
std::string config_fingerprint(const PriorSpec& prior, const MCMCConfig& config);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ar1dp
