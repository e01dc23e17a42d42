#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <doctest.h>

#include "ar1dp/mixture_model.hpp"
#include "support/geweke.hpp"
#include "support/stats.hpp"

using namespace ar1dp;
namespace ts = teststats;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Dataset column_data(std::vector<double> values) {
  Matrix<double> y(1, values.size());
  for (std::size_t j = 0; j < values.size(); ++j) y(0, j) = values[j];
  return Dataset(std::move(y));
}

}  // namespace

TEST_CASE("Dataset validation") {
  Matrix<double> y(2, 3, 1.0);
  CHECK_NOTHROW(Dataset(y));
  CHECK_THROWS_AS(Dataset(y, std::vector<double>(5, 0.0), 1), std::invalid_argument);
  Dataset d(y, std::vector<double>(12, 0.5), 2);
  CHECK(d.num_covariates() == 2);
  CHECK(d.x(1, 2).size() == 2);
  y(0, 0) = std::nan("");
  CHECK_THROWS_AS(Dataset{y}, std::invalid_argument);
}

TEST_CASE("BaseMeasure validation") {
  CHECK_NOTHROW(BaseMeasure{}.validate());
  CHECK_THROWS_AS((BaseMeasure{0.0, 0.0, 2.0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BaseMeasure{0.0, 0.1, -1.0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BaseMeasure{0.0, 0.1, 1.0, 0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BaseMeasure{0.0, 0.1, 1.0, 1.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("component_log_likelihood") {
  BaseMeasure base;
  base.kernel_lambda = 1.0;
  CHECK(component_log_likelihood(1.5, {}, {1.5, 1.0}, {}, base) == doctest::Approx(-kHalfLog2Pi));
  base.kernel_lambda = 0.1;
  const std::vector<double> x{0.0};
  const std::vector<double> b{3.0};
  CHECK(component_log_likelihood(0.0, x, {0.0, 10.0}, b, base) == doctest::Approx(-kHalfLog2Pi));

  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    base.kernel_lambda = 0.05 + rng.uniform();
    const std::vector<double> xi{rng.normal(), rng.normal()};
    const std::vector<double> bi{rng.normal(), rng.normal()};
    const Component c{rng.normal(0, 3), 0.1 + 3 * rng.uniform()};
    const double y = rng.normal(0, 4);
    const double m = c.mu + xi[0] * bi[0] + xi[1] * bi[1];
    const boost::math::normal_distribution<double> nd(m, 1.0 / std::sqrt(base.kernel_lambda * c.tau));
    CHECK(std::abs(component_log_likelihood(y, xi, c, bi, base) - std::log(boost::math::pdf(nd, y))) < 1e-12);
  }
  CHECK_THROWS_AS(component_log_likelihood(0.0, {}, {0.0, 0.0}, {}, base), std::invalid_argument);
  const std::vector<double> b2{1.0, 2.0};
  CHECK_THROWS_AS(component_log_likelihood(0.0, x, {0.0, 1.0}, b2, base), std::invalid_argument);
}

TEST_CASE("Normal-Gamma conjugate algebra") {
  const BaseMeasure base{0.0, 1.0, 1.0, 1.0, 1.0};
  const std::vector<double> r{2.0};
  const auto ng = normal_gamma_posterior(r, base);
  CHECK(ng.mu == doctest::Approx(1.0));
  CHECK(ng.lambda == doctest::Approx(2.0));
  CHECK(ng.alpha == doctest::Approx(1.5));
  CHECK(ng.beta == doctest::Approx(2.0));

  const std::vector<double> zeros{0.0, 0.0};
  const BaseMeasure diffuse{5.0, 0.01, 2.0, 1.0, 1.0};
  const auto z = normal_gamma_posterior(zeros, diffuse);
  CHECK(std::abs(z.mu) < 5.0 * 0.01);
  CHECK(z.alpha == doctest::Approx(3.0));

  SUBCASE("posterior moments against 2-D grid integration") {
    // G0(mu, tau) * prod N(r; mu, 1/(lambda tau)) integrated on a grid.
    const BaseMeasure b{0.5, 0.7, 2.5, 1.5, 0.4};
    const std::vector<double> res{1.2, -0.3, 2.2};
    const auto post = normal_gamma_posterior(res, b);
    double z0 = 0.0, zmu = 0.0, ztau = 0.0;
    const boost::math::gamma_distribution<double> gtau(b.alpha, 1.0 / b.beta);
    const int N = 1200;
    for (int i = 0; i < N; ++i) {
      const double tau = (i + 0.5) * 12.0 / N;
      const boost::math::normal_distribution<double> gm(b.mu0, 1.0 / std::sqrt(b.lambda0 * tau));
      for (int k = 0; k < N; ++k) {
        const double mu = -15.0 + (k + 0.5) * 30.0 / N;
        double lik = 1.0;
        for (double v : res) {
          const boost::math::normal_distribution<double> kern(mu, 1.0 / std::sqrt(b.kernel_lambda * tau));
          lik *= boost::math::pdf(kern, v);
        }
        const double wgt = boost::math::pdf(gtau, tau) * boost::math::pdf(gm, mu) * lik;
        z0 += wgt;
        zmu += wgt * mu;
        ztau += wgt * tau;
      }
    }
    CHECK(zmu / z0 == doctest::Approx(post.mu).epsilon(1e-4));
    CHECK(ztau / z0 == doctest::Approx(post.alpha / post.beta).epsilon(1e-4));
  }
}

TEST_CASE("update_components") {
  SUBCASE("empty components are fresh base draws") {
    const BaseMeasure base{1.0, 0.5, 3.0, 2.0, 1.0};
    const Dataset data = column_data({0.0, 0.1});
    AllocationState alloc(1, 2, 0);
    Rng rng(2);
    std::vector<double> mu, tau;
    for (int i = 0; i < 10000; ++i) {
      const auto comps = update_components(alloc, data, {}, base, 3, rng);
      mu.push_back(comps[2].mu);
      tau.push_back(comps[2].tau);
    }
    // Marginal of mu under Normal-Gamma is Student t with 2 alpha dof.
    const boost::math::students_t_distribution<double> st(2.0 * base.alpha);
    const double scale = std::sqrt(base.beta / (base.alpha * base.lambda0));
    CHECK(ts::ks_pvalue(mu, [&](double m) { return boost::math::cdf(st, (m - base.mu0) / scale); }) > 0.01);
    CHECK(ts::ks_pvalue(tau, ts::gamma_cdf(base.alpha, base.beta)) > 0.01);
  }

  SUBCASE("occupied components follow the conjugate posterior pooled across times") {
    const BaseMeasure base{0.0, 1.0, 1.0, 1.0, 1.0};
    Matrix<double> y(2, 2);
    y(0, 0) = 2.0;   // component 0
    y(0, 1) = 40.0;  // component 1
    y(1, 0) = 50.0;  // component 1
    y(1, 1) = 60.0;  // component 1
    const Dataset data(std::move(y));
    AllocationState alloc(2, 2, 1);
    alloc(0, 0) = 0;
    Rng rng(3);
    std::vector<double> mu, tau;
    for (int i = 0; i < 20000; ++i) {
      const auto c = update_components(alloc, data, {}, base, 2, rng);
      mu.push_back(c[0].mu);
      tau.push_back(c[0].tau);
    }
    // NG(mu 1, lambda 2, alpha 1.5, beta 2): E tau = 0.75, E mu = 1.
    CHECK(ts::ks_pvalue(tau, ts::gamma_cdf(1.5, 2.0)) > 0.01);
    CHECK(ts::mean(mu) == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("allocation probabilities") {
  const std::vector<double> lw{std::log(0.5), std::log(0.5)};
  const std::vector<double> ll{-1.0, -2.0};
  const auto p = allocation_probabilities(lw, ll);
  CHECK(p[0] == doctest::Approx(std::exp(-1.0) / (std::exp(-1.0) + std::exp(-2.0))));
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));

  // Shift invariance, including shifts that underflow in linear space.
  for (double shift : {-1e4, -800.0, 0.0, 700.0}) {
    const std::vector<double> ls{-1.0 + shift, -2.0 + shift};
    const auto q = allocation_probabilities(lw, ls);
    CHECK(q[0] == doctest::Approx(p[0]).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(p[1]).epsilon(1e-12));
  }
}

TEST_CASE("sample_allocations") {
  const BaseMeasure base{0.0, 0.01, 2.0, 1.0, 1.0};
  Rng rng(4);
  SUBCASE("equal likelihoods leave the weights") {
    const Dataset data = column_data({0.0});
    WeightMatrix w(1, 2);
    w(0, 0) = 0.3;
    w(0, 1) = 0.7;
    const ComponentParams comps{{0.0, 1.0}, {0.0, 1.0}};
    std::vector<double> counts(2, 0.0);
    for (int i = 0; i < 100000; ++i) counts[static_cast<std::size_t>(sample_allocations(data, w, comps, {}, base, rng)(0, 0))] += 1.0;
    const std::vector<double> expected{30000.0, 70000.0};
    CHECK(ts::chi_square_pvalue(counts, expected) > 0.01);
  }
  SUBCASE("a hopeless component is never chosen") {
    const Dataset data = column_data({0.0, 0.5, -0.5});
    WeightMatrix w(1, 2);
    w(0, 0) = 0.01;
    w(0, 1) = 0.99;
    const ComponentParams comps{{0.0, 1.0}, {1e4, 1.0}};
    for (int i = 0; i < 100000 / 3; ++i) {
      const auto s = sample_allocations(data, w, comps, {}, base, rng);
      for (std::size_t j = 0; j < 3; ++j) REQUIRE(s(0, j) == 0);
    }
  }
  SUBCASE("all kernels underflowing still yields a valid draw") {
    const Dataset data = column_data({1e6});
    WeightMatrix w(1, 3, 1.0 / 3.0);
    const ComponentParams comps{{0.0, 100.0}, {1.0, 100.0}, {-5.0, 100.0}};
    const auto s = sample_allocations(data, w, comps, {}, base, rng);
    CHECK(s(0, 0) == 1);  // closest mean dominates
  }
}

TEST_CASE("regression full conditional") {
  const BaseMeasure base{0.0, 0.01, 2.0, 1.0, 0.5};
  Rng rng(5);
  const std::size_t n = 6;
  Matrix<double> y(1, n);
  std::vector<double> x(n);
  AllocationState alloc(1, n);
  const ComponentParams comps{{1.0, 2.0}, {-2.0, 0.5}};
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = rng.normal();
    alloc(0, j) = static_cast<int>(j % 2);
    y(0, j) = comps[j % 2].mu + 1.7 * x[j] + rng.normal(0.0, 0.3);
  }
  const Dataset data(y, x, 1);
  RegressionState reg = RegressionState::zeros(1, 1, 10.0);

  SUBCASE("single covariate matches the closed form") {
    double prec = 1.0 / 10.0;
    double num = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& c = comps[j % 2];
      const double p = base.kernel_lambda * c.tau;
      prec += p * x[j] * x[j];
      num += p * x[j] * (y(0, j) - c.mu);
    }
    const auto post = regression_posterior(data, alloc, comps, reg, base, 0);
    CHECK(std::abs(post.mean[0] - num / prec) < 1e-10);
    CHECK(std::abs(post.covariance(0, 0) - 1.0 / prec) < 1e-10);
  }
  SUBCASE("vanishing prior variance pins beta at zero") {
    RegressionState tight = RegressionState::zeros(1, 1, 1e-12);
    const auto r = update_regression(data, alloc, comps, tight, base, rng);
    CHECK(std::abs(r.beta(0, 0)) < 1e-5);
  }
  SUBCASE("no covariates is a no-op") {
    const Dataset plain(y);
    const RegressionState none;
    const auto r = update_regression(plain, alloc, comps, none, base, rng);
    CHECK_FALSE(r.active());
  }
  SUBCASE("zero covariates reproduce the covariate-free likelihood") {
    const Dataset zero_x(y, std::vector<double>(n, 0.0), 1);
    const auto r = update_regression(zero_x, alloc, comps, reg, base, rng);
    for (std::size_t j = 0; j < n; ++j)
      CHECK(component_log_likelihood(y(0, j), zero_x.x(0, j), comps[j % 2], r.beta.row(0), base) ==
            component_log_likelihood(y(0, j), {}, comps[j % 2], {}, base));
  }
}

TEST_CASE("Gibbs steps 1 and 2 leave the joint law invariant") {
  Rng rng(6);
  ts::GewekeSetup setup;
  setup.draws = 100000;
  for (const auto& m : ts::geweke_mixture(setup, rng)) {
    CAPTURE(m.name);
    CAPTURE(m.marginal_mean);
    CAPTURE(m.successive_mean);
    CHECK(std::abs(m.z) < 3.0);
  }
}
