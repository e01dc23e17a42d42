#pragma once

// Truncated stick-breaking weights, DP partition mathematics (EPPF, prior
// expected cluster count) and canonical partitions.

#include <cstddef>
#include <span>
#include <vector>

#include "ar1dp/matrix.hpp"
#include "ar1dp/rng.hpp"
#include "ar1dp/stochastic_prior.hpp"

namespace ar1dp {

/// T x J mixture weights; each row is a probability vector whose last entry
/// holds the mass left over after J - 1 sticks.
using WeightMatrix = Matrix<double>;

/// Truncation level used unless configured otherwise.
inline constexpr std::size_t kDefaultTruncation = 50;

/// w_1 = xi_1, w_j = xi_j prod_{l<j} (1 - xi_l), w_J = remainder.
std::vector<double> stick_break(std::span<const double> xi, std::size_t J);

/// Weights implied by latent paths: stick_break(copula_transform(eps, M)) row by row.
WeightMatrix weights_from_eps(const EpsPath& eps, double mass);

WeightMatrix sample_weight_paths(const WeightProcess& process, std::size_t T, std::size_t J,
                                 Rng& rng);
WeightMatrix sample_weight_paths(WeightProcessKind kind, double psi, double mass, std::size_t T,
                                 std::size_t J, Rng& rng);

/// log prod_h w_h^{counts[h]} for the weights induced by one row of
/// latent sticks (eps.size() == counts.size() - 1), evaluated in log space.
/// This is the allocation likelihood up to the multinomial coefficient.
double allocation_log_likelihood(std::span<const double> eps, std::span<const double> counts,
                                 double mass);

/// log EPPF of a DP(M) partition with the given block sizes.
double eppf_log_prob(std::span<const std::size_t> block_sizes, double mass);

/// Prior mean of the number of clusters among n draws: sum_i M / (M + i - 1).
double expected_num_clusters(std::size_t n, double mass);

/// Draws an index with probability proportional to probs.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

/// Partition of {0, ..., n-1}. Labels are canonical: contiguous 0..K-1 in
/// order of first appearance, so equal partitions compare equal.
class Partition {
 public:
  Partition() = default;
  /// Canonicalises arbitrary integer labels.
  explicit Partition(std::span<const int> labels);

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] std::size_t num_blocks() const noexcept { return sizes_.size(); }
  [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<std::size_t>& block_sizes() const noexcept { return sizes_; }
  [[nodiscard]] bool same_block(std::size_t i, std::size_t j) const noexcept {
    return labels_[i] == labels_[j];
  }

  friend bool operator==(const Partition& a, const Partition& b) { return a.labels_ == b.labels_; }
  friend bool operator<(const Partition& a, const Partition& b) { return a.labels_ < b.labels_; }

 private:
  std::vector<int> labels_;
  std::vector<std::size_t> sizes_;
};

/// All Bell(n) partitions of {0..n-1} in restricted-growth order. Intended
/// for n <= 10.
std::vector<Partition> enumerate_partitions(std::size_t n);

}  // namespace ar1dp
