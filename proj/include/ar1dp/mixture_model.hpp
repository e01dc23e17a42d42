#pragma once

// Gaussian kernel with Normal-Gamma base measure and optional linear
// covariate term: y_tj ~ N(mu_s + x_tj' beta_t, 1 / (lambda * tau_s)).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ar1dp/matrix.hpp"
#include "ar1dp/random_measure.hpp"
#include "ar1dp/rng.hpp"

namespace ar1dp {

/// T x n panel of scalar observations with optional T x n x p covariates.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix<double> y);
  Dataset(Matrix<double> y, std::vector<double> x, std::size_t p);

  [[nodiscard]] std::size_t num_times() const noexcept { return y_.rows(); }
  [[nodiscard]] std::size_t num_units() const noexcept { return y_.cols(); }
  [[nodiscard]] std::size_t num_covariates() const noexcept { return p_; }
  [[nodiscard]] bool has_covariates() const noexcept { return p_ > 0; }

  [[nodiscard]] double y(std::size_t t, std::size_t j) const noexcept { return y_(t, j); }
  [[nodiscard]] const Matrix<double>& values() const noexcept { return y_; }
  [[nodiscard]] std::span<const double> x(std::size_t t, std::size_t j) const noexcept {
    return {x_.data() + (t * y_.cols() + j) * p_, p_};
  }

  std::vector<std::string> time_labels;
  std::vector<std::string> unit_labels;
  std::vector<std::string> covariate_names;

 private:
  Matrix<double> y_;
  std::vector<double> x_;
  std::size_t p_ = 0;
};

/// G0: mu | tau ~ N(mu0, 1 / (lambda0 tau)), tau ~ Gamma(alpha, beta) (rate).
/// Kernel precision is kernel_lambda * tau.
struct BaseMeasure {
  double mu0 = 0.0;
  double lambda0 = 0.01;
  double alpha = 2.0;
  double beta = 1.0;
  double kernel_lambda = 1.0;

  void validate() const;
};

struct Component {
  double mu = 0.0;
  double tau = 1.0;
};
using ComponentParams = std::vector<Component>;

/// T x n component indices in 0..J-1.
using AllocationState = Matrix<int>;

struct RegressionState {
  Matrix<double> beta;  // T x p; empty when no covariates
  double prior_variance = 10.0;

  [[nodiscard]] bool active() const noexcept { return beta.cols() > 0; }
  static RegressionState zeros(std::size_t T, std::size_t p, double prior_variance = 10.0);
};

/// log N(y; mu + x'beta, 1 / (lambda tau)). The covariate term is skipped when
/// either span is empty.
double component_log_likelihood(double y, std::span<const double> x, const Component& theta,
                                std::span<const double> beta, const BaseMeasure& base);

Component sample_from_base(const BaseMeasure& base, Rng& rng);

struct NormalGammaParams {
  double mu;
  double lambda;
  double alpha;
  double beta;
};

/// Conjugate update of G0 given residuals observed with precision
/// kernel_lambda * tau.
NormalGammaParams normal_gamma_posterior(std::span<const double> residuals,
                                         const BaseMeasure& base);

Component sample_normal_gamma(const NormalGammaParams& ng, Rng& rng);

/// Residual y - x'beta_t for one observation.
double residual(const Dataset& data, const RegressionState& reg, std::size_t t, std::size_t j);

/// Gibbs step 1: fresh G0 draws for empty components, conjugate draws for
/// occupied ones (residuals pooled over all times).
ComponentParams update_components(const AllocationState& alloc, const Dataset& data,
                                  const RegressionState& reg, const BaseMeasure& base,
                                  std::size_t J, Rng& rng);

/// Softmax of log_w + log_lik, normalised in log space.
std::vector<double> allocation_probabilities(std::span<const double> log_w,
                                             std::span<const double> log_lik);

/// Gibbs step 2: s_tj ~ w_th f(y_tj; theta_h), independently over (t, j).
AllocationState sample_allocations(const Dataset& data, const WeightMatrix& weights,
                                   const ComponentParams& comps, const RegressionState& reg,
                                   const BaseMeasure& base, Rng& rng);

/// Component occupancy per time, T x J, as doubles for the weight kernels.
Matrix<double> allocation_counts(const AllocationState& alloc, std::size_t J);

struct GaussianPosterior {
  std::vector<double> mean;
  Matrix<double> covariance;
};

/// Full conditional of beta_t under N(0, v0 I) prior.
GaussianPosterior regression_posterior(const Dataset& data, const AllocationState& alloc,
                                       const ComponentParams& comps, const RegressionState& reg,
                                       const BaseMeasure& base, std::size_t t);

/// Draws every beta_t from its full conditional; a no-op without covariates.
RegressionState update_regression(const Dataset& data, const AllocationState& alloc,
                                  const ComponentParams& comps, const RegressionState& reg,
                                  const BaseMeasure& base, Rng& rng);

}  // namespace ar1dp
