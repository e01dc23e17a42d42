#pragma once

// Grid-quadrature posterior of the latent paths given fixed allocation
// counts, for T <= 2. The target
//   prod_l [ AR(1) prior of column l ] * prod_t prod_h w_th^{c_th}
// factorises over sticks, since sum_h c_h log w_h =
// sum_l [c_l log xi_l + (sum_{h>l} c_h) log(1 - xi_l)]; each stick is a 1-D
// (T = 1) or 2-D (T = 2) integral on a uniform grid.

#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ar1dp/matrix.hpp"

namespace teststats {

struct StickMoments {
  double mean_xi = 0.0;
  double var_xi = 0.0;
  double mean_eps = 0.0;
  double var_eps = 0.0;
};

struct CsmcOracle {
  // moments[t][l]
  std::vector<std::vector<StickMoments>> moments;
  double log_evidence = 0.0;  // log of integral prior * prod w^c
};

inline CsmcOracle csmc_quadrature(const ar1dp::Matrix<double>& counts, double psi, double mass,
                                  std::size_t grid_points = 1601, double half_width = 9.0) {
  const std::size_t T = counts.rows();
  const std::size_t L = counts.cols() - 1;
  const boost::math::normal_distribution<double> z;
  const std::size_t N = grid_points;
  const double de = 2.0 * half_width / static_cast<double>(N - 1);

  std::vector<double> e(N), log_xi(N), log_rest(N), log_phi(N);
  for (std::size_t i = 0; i < N; ++i) {
    e[i] = -half_width + de * static_cast<double>(i);
    const double lq = std::log(boost::math::cdf(boost::math::complement(z, e[i]))) / mass;
    log_rest[i] = lq;
    log_xi[i] = std::log(-std::expm1(lq));
    log_phi[i] = std::log(boost::math::pdf(z, e[i]));
  }

  CsmcOracle out;
  out.moments.assign(T, std::vector<StickMoments>(L));
  for (std::size_t l = 0; l < L; ++l) {
    // Per-time log-likelihood of stick l on the grid.
    std::vector<std::vector<double>> ll(T, std::vector<double>(N));
    for (std::size_t t = 0; t < T; ++t) {
      double above = 0.0;
      for (std::size_t h = l + 1; h < counts.cols(); ++h) above += counts(t, h);
      for (std::size_t i = 0; i < N; ++i)
        ll[t][i] = (counts(t, l) > 0 ? counts(t, l) * log_xi[i] : 0.0) +
                   (above > 0 ? above * log_rest[i] : 0.0);
    }
    if (T == 1) {
      std::vector<double> lw(N);
      double mx = -INFINITY;
      for (std::size_t i = 0; i < N; ++i) mx = std::max(mx, lw[i] = log_phi[i] + ll[0][i]);
      double zsum = 0, sx = 0, sxx = 0, se = 0, see = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const double w = std::exp(lw[i] - mx);
        const double xi = std::exp(log_xi[i]);
        zsum += w;
        sx += w * xi;
        sxx += w * xi * xi;
        se += w * e[i];
        see += w * e[i] * e[i];
      }
      auto& m = out.moments[0][l];
      m.mean_xi = sx / zsum;
      m.var_xi = sxx / zsum - m.mean_xi * m.mean_xi;
      m.mean_eps = se / zsum;
      m.var_eps = see / zsum - m.mean_eps * m.mean_eps;
      out.log_evidence += mx + std::log(zsum * de);
    } else {
      // Joint weights on the 2-D grid: phi(e1) L1(e1) N(e2; psi e1, 1 - psi^2) L2(e2).
      const double v = 1.0 - psi * psi;
      const double lnorm = -0.5 * std::log(2.0 * M_PI * v);
      double mx = -INFINITY;
      std::vector<double> lw(N * N);
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k) {
          const double d = e[k] - psi * e[i];
          const double val = log_phi[i] + ll[0][i] + lnorm - 0.5 * d * d / v + ll[1][k];
          lw[i * N + k] = val;
          mx = std::max(mx, val);
        }
      double zsum = 0;
      double s[2][4] = {};
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k) {
          const double w = std::exp(lw[i * N + k] - mx);
          if (w == 0.0) continue;
          zsum += w;
          const double x1 = std::exp(log_xi[i]);
          const double x2 = std::exp(log_xi[k]);
          s[0][0] += w * x1, s[0][1] += w * x1 * x1, s[0][2] += w * e[i], s[0][3] += w * e[i] * e[i];
          s[1][0] += w * x2, s[1][1] += w * x2 * x2, s[1][2] += w * e[k], s[1][3] += w * e[k] * e[k];
        }
      for (std::size_t t = 0; t < 2; ++t) {
        auto& m = out.moments[t][l];
        m.mean_xi = s[t][0] / zsum;
        m.var_xi = s[t][1] / zsum - m.mean_xi * m.mean_xi;
        m.mean_eps = s[t][2] / zsum;
        m.var_eps = s[t][3] / zsum - m.mean_eps * m.mean_eps;
      }
      out.log_evidence += mx + std::log(zsum * de * de);
    }
  }
  return out;
}

}  // namespace teststats
