#include "ar1dp/mixture_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ar1dp/kernels.hpp"
#include "ar1dp/normal.hpp"

namespace ar1dp {

Dataset::Dataset(Matrix<double> y) : y_(std::move(y)) {
  for (double v : y_.storage())
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: observations must be finite");
}

Dataset::Dataset(Matrix<double> y, std::vector<double> x, std::size_t p)
    : Dataset(std::move(y)) {
  if (p == 0) {
    if (!x.empty()) throw std::invalid_argument("Dataset: covariates given with p = 0");
    return;
  }
  if (x.size() != y_.rows() * y_.cols() * p)
    throw std::invalid_argument("Dataset: covariate array does not match T x n x p");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: covariates must be finite");
  x_ = std::move(x);
  p_ = p;
}

void BaseMeasure::validate() const {
  if (!std::isfinite(mu0)) throw std::invalid_argument("base measure: mu0 must be finite");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("base measure: lambda0 must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("base measure: alpha must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("base measure: beta must be positive");
  if (!(kernel_lambda > 0.0))
    throw std::invalid_argument("base measure: kernel lambda must be positive");
}

RegressionState RegressionState::zeros(std::size_t T, std::size_t p, double prior_variance) {
  if (!(prior_variance > 0.0))
    throw std::invalid_argument("regression prior variance must be positive");
  RegressionState r;
  r.beta = Matrix<double>(T, p, 0.0);
  r.prior_variance = prior_variance;
  return r;
}

double component_log_likelihood(double y, std::span<const double> x, const Component& theta,
                                std::span<const double> beta, const BaseMeasure& base) {
  if (!(theta.tau > 0.0)) throw std::invalid_argument("component precision tau must be > 0");
  double mean = theta.mu;
  if (!x.empty() && !beta.empty()) {
    if (x.size() != beta.size()) throw std::invalid_argument("covariate/beta size mismatch");
    for (std::size_t k = 0; k < x.size(); ++k) mean += x[k] * beta[k];
  }
  return normal_logpdf(y, mean, 1.0 / (base.kernel_lambda * theta.tau));
}

Component sample_from_base(const BaseMeasure& base, Rng& rng) {
  Component c;
  c.tau = rng.gamma(base.alpha, base.beta);
  c.mu = rng.normal(base.mu0, 1.0 / std::sqrt(base.lambda0 * c.tau));
  return c;
}

namespace {

NormalGammaParams posterior_from_stats(double n, double mean, double ss, const BaseMeasure& base) {
  const double k = base.kernel_lambda;
  NormalGammaParams ng;
  ng.lambda = base.lambda0 + k * n;
  ng.mu = (base.lambda0 * base.mu0 + k * n * mean) / ng.lambda;
  ng.alpha = base.alpha + 0.5 * n;
  const double d = mean - base.mu0;
  ng.beta = base.beta + 0.5 * k * ss + 0.5 * base.lambda0 * k * n * d * d / ng.lambda;
  return ng;
}

}  // namespace

NormalGammaParams normal_gamma_posterior(std::span<const double> residuals,
                                         const BaseMeasure& base) {
  const double n = static_cast<double>(residuals.size());
  if (residuals.empty()) return {base.mu0, base.lambda0, base.alpha, base.beta};
  double mean = 0.0;
  for (double r : residuals) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : residuals) ss += (r - mean) * (r - mean);
  return posterior_from_stats(n, mean, ss, base);
}

Component sample_normal_gamma(const NormalGammaParams& ng, Rng& rng) {
  Component c;
  c.tau = rng.gamma(ng.alpha, ng.beta);
  c.mu = rng.normal(ng.mu, 1.0 / std::sqrt(ng.lambda * c.tau));
  return c;
}

double residual(const Dataset& data, const RegressionState& reg, std::size_t t, std::size_t j) {
  double r = data.y(t, j);
  if (data.has_covariates() && reg.active()) {
    const auto x = data.x(t, j);
    for (std::size_t k = 0; k < x.size(); ++k) r -= x[k] * reg.beta(t, k);
  }
  return r;
}

ComponentParams update_components(const AllocationState& alloc, const Dataset& data,
                                  const RegressionState& reg, const BaseMeasure& base,
                                  std::size_t J, Rng& rng) {
  const std::size_t T = data.num_times();
  const std::size_t n = data.num_units();
  std::vector<double> count(J, 0.0), sum(J, 0.0), ss(J, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      const auto h = static_cast<std::size_t>(alloc(t, j));
      count[h] += 1.0;
      sum[h] += residual(data, reg, t, j);
    }
  for (std::size_t h = 0; h < J; ++h)
    if (count[h] > 0.0) sum[h] /= count[h];  // now the mean
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      const auto h = static_cast<std::size_t>(alloc(t, j));
      const double d = residual(data, reg, t, j) - sum[h];
      ss[h] += d * d;
    }

  ComponentParams comps(J);
  for (std::size_t h = 0; h < J; ++h) {
    if (count[h] == 0.0)
      comps[h] = sample_from_base(base, rng);
    else
      comps[h] = sample_normal_gamma(posterior_from_stats(count[h], sum[h], ss[h], base), rng);
  }
  return comps;
}

std::vector<double> allocation_probabilities(std::span<const double> log_w,
                                             std::span<const double> log_lik) {
  if (log_w.size() != log_lik.size())
    throw std::invalid_argument("allocation_probabilities: size mismatch");
  std::vector<double> p(log_w.size());
  for (std::size_t h = 0; h < p.size(); ++h) p[h] = log_w[h] + log_lik[h];
  kernels::normalize_log_weights(p);
  return p;
}

AllocationState sample_allocations(const Dataset& data, const WeightMatrix& weights,
                                   const ComponentParams& comps, const RegressionState& reg,
                                   const BaseMeasure& base, Rng& rng) {
  const std::size_t T = data.num_times();
  const std::size_t n = data.num_units();
  const std::size_t J = comps.size();
  if (weights.rows() != T || weights.cols() != J)
    throw std::invalid_argument("sample_allocations: weights must be T x J");

  std::vector<double> mu(J), prec(J), log_norm(J), log_w(J), score(J);
  for (std::size_t h = 0; h < J; ++h) {
    mu[h] = comps[h].mu;
    prec[h] = base.kernel_lambda * comps[h].tau;
    log_norm[h] = 0.5 * std::log(prec[h]) - kLogSqrt2Pi;
  }
  const auto& k = kernels::active();
  AllocationState alloc(T, n);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t h = 0; h < J; ++h) log_w[h] = std::log(weights(t, h));
    for (std::size_t j = 0; j < n; ++j) {
      k.gaussian_scores(residual(data, reg, t, j), mu.data(), prec.data(), log_norm.data(),
                        log_w.data(), score.data(), J);
      const double m = k.max_value(score.data(), J);
      if (!std::isfinite(m)) throw std::runtime_error("sample_allocations: no finite score");
      k.exp_shifted(score.data(), m, score.data(), J);
      alloc(t, j) = static_cast<int>(sample_categorical(score, rng));
    }
  }
  return alloc;
}

Matrix<double> allocation_counts(const AllocationState& alloc, std::size_t J) {
  Matrix<double> counts(alloc.rows(), J, 0.0);
  for (std::size_t t = 0; t < alloc.rows(); ++t)
    for (std::size_t j = 0; j < alloc.cols(); ++j)
      counts(t, static_cast<std::size_t>(alloc(t, j))) += 1.0;
  return counts;
}

namespace {

struct RegressionSystem {
  Eigen::MatrixXd precision;
  Eigen::VectorXd rhs;
};

RegressionSystem regression_system(const Dataset& data, const AllocationState& alloc,
                                   const ComponentParams& comps, const RegressionState& reg,
                                   const BaseMeasure& base, std::size_t t) {
  const std::size_t p = data.num_covariates();
  RegressionSystem sys{Eigen::MatrixXd::Identity(p, p) / reg.prior_variance,
                       Eigen::VectorXd::Zero(p)};
  for (std::size_t j = 0; j < data.num_units(); ++j) {
    const Component& c = comps[static_cast<std::size_t>(alloc(t, j))];
    const double w = base.kernel_lambda * c.tau;
    const auto xs = data.x(t, j);
    const Eigen::Map<const Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(p));
    sys.precision.noalias() += w * x * x.transpose();
    sys.rhs += w * (data.y(t, j) - c.mu) * x;
  }
  return sys;
}

}  // namespace

GaussianPosterior regression_posterior(const Dataset& data, const AllocationState& alloc,
                                       const ComponentParams& comps, const RegressionState& reg,
                                       const BaseMeasure& base, std::size_t t) {
  if (!data.has_covariates()) throw std::invalid_argument("regression_posterior: no covariates");
  const std::size_t p = data.num_covariates();
  const RegressionSystem sys = regression_system(data, alloc, comps, reg, base, t);
  const Eigen::LLT<Eigen::MatrixXd> llt(sys.precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("regression posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(sys.rhs);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  GaussianPosterior out{std::vector<double>(mean.data(), mean.data() + p), Matrix<double>(p, p)};
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b)
      out.covariance(a, b) = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return out;
}

RegressionState update_regression(const Dataset& data, const AllocationState& alloc,
                                  const ComponentParams& comps, const RegressionState& reg,
                                  const BaseMeasure& base, Rng& rng) {
  if (!data.has_covariates() || !reg.active()) return reg;
  const std::size_t p = data.num_covariates();
  RegressionState next = reg;
  for (std::size_t t = 0; t < data.num_times(); ++t) {
    const RegressionSystem sys = regression_system(data, alloc, comps, reg, base, t);
    const Eigen::LLT<Eigen::MatrixXd> llt(sys.precision);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("regression posterior precision is not positive definite");
    const Eigen::VectorXd mean = llt.solve(sys.rhs);
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
    // precision = L L', so L'^{-1} z has covariance precision^{-1}.
    const Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
    for (std::size_t k = 0; k < p; ++k) next.beta(t, k) = draw(static_cast<Eigen::Index>(k));
  }
  return next;
}

}  // namespace ar1dp
