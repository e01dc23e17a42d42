#pragma once

// Posterior post-processing: co-clustering, Binder point partitions, the
// man/neutral/woman cluster labelling rule, predictive density grids and
// Hellinger distances.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ar1dp/inference.hpp"
#include "ar1dp/matrix.hpp"
#include "ar1dp/random_measure.hpp"

namespace ar1dp {

/// n x n posterior same-cluster probabilities at one time index.
struct CoClusteringMatrix {
  std::size_t time = 0;
  Matrix<double> probs;
};

CoClusteringMatrix coclustering(const Trace& trace, std::size_t t);

/// Distinct partitions visited at time t, in order of first appearance.
std::vector<Partition> sampled_partitions(const Trace& trace, std::size_t t);

/// sum_{i<j} |1[i ~ j] - p_ij|.
double binder_loss(const Partition& partition, const CoClusteringMatrix& cc);

struct BinderResult {
  Partition partition;
  double loss = 0.0;
};

/// Candidate with the smallest Binder loss (equal costs); ties go to fewer
/// clusters, then to the earlier candidate.
BinderResult binder_partition(const CoClusteringMatrix& cc, std::span<const Partition> candidates);

/// Exhaustive search over all partitions; n <= 10.
BinderResult binder_partition_exhaustive(const CoClusteringMatrix& cc);

enum class ClusterLabel { Man, Neutral, Woman };
std::string_view to_string(ClusterLabel label) noexcept;

struct ClusterSummary {
  std::size_t cluster = 0;  // canonical block id
  std::size_t size = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 for singletons
  ClusterLabel label = ClusterLabel::Neutral;
};

/// Labels a cluster by where zero sits relative to mean +- sd.
ClusterLabel label_cluster(double mean, double sd) noexcept;

/// One summary per block of `partition`, computed from `values` (the
/// observations at the partition's time index).
std::vector<ClusterSummary> label_clusters(std::span<const double> values,
                                           const Partition& partition);
std::vector<ClusterSummary> label_clusters(const Dataset& data, const Partition& partition,
                                           std::size_t t);

struct DensityGrid {
  std::size_t time = 0;
  std::vector<double> grid;
  std::vector<double> values;  // averaged over draws
};

/// Strictly increasing grid of `points` values spanning [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t points);

/// 512 points over data min/max +- 3 data sd at time t.
std::vector<double> default_grid(const Dataset& data, std::size_t t, std::size_t points = 512);

/// Mixture density sum_h w_th N(y; mu_h + x'beta_t, 1/(lambda tau_h)) averaged
/// over draws. Without a covariate profile the regression offset is zero.
DensityGrid posterior_predictive_grid(const Trace& trace, std::size_t t,
                                      std::span<const double> grid,
                                      std::span<const double> covariate_profile = {});

double trapezoid(std::span<const double> grid, std::span<const double> values);

/// sqrt(1/2 * integral (sqrt f - sqrt g)^2) by the trapezoid rule, clipped to [0, 1].
double hellinger_distance(std::span<const double> f, std::span<const double> g,
                          std::span<const double> grid);

struct HellingerStudySpec {
  WeightProcessKind process = WeightProcessKind::Ar1Dp;
  double psi = 0.5;
  double mass = 10.0;
  std::size_t truncation = 20;
  double atom_lo = -30.0;  // G0 = Uniform(atom_lo, atom_hi) on locations
  double atom_hi = 30.0;
  std::size_t grid_points = 1501;
};

/// replications x (T - 1) matrix of d_H(f_t, f_1), t = 2..T, for random
/// densities f_t drawn from the prior as unit-variance location mixtures.
Matrix<double> prior_hellinger_study(const HellingerStudySpec& spec, std::size_t T,
                                     std::size_t replications, Rng& rng);

struct PosteriorSummary {
  double mean = 0.0;
  double median = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
  double prob_positive = 0.0;
};

/// Linear-interpolation quantile (type 7).
double quantile(std::vector<double> values, double prob);

PosteriorSummary summarize_draws(std::span<const double> draws);

}  // namespace ar1dp
