#include "ar1dp/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ar1dp/kernels.hpp"

namespace ar1dp {

CoClusteringMatrix coclustering(const Trace& trace, std::size_t t) {
  if (trace.draws.empty()) throw std::invalid_argument("coclustering: empty trace");
  if (t >= trace.T) throw std::out_of_range("coclustering: time index out of range");
  const std::size_t n = trace.n;
  CoClusteringMatrix cc{t, Matrix<double>(n, n, 0.0)};
  for (const auto& d : trace.draws) {
    const auto s = d.alloc.row(t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (s[i] == s[j]) cc.probs(i, j) += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(trace.draws.size());
  for (std::size_t i = 0; i < n; ++i) {
    cc.probs(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      cc.probs(i, j) *= inv;
      cc.probs(j, i) = cc.probs(i, j);
    }
  }
  return cc;
}

std::vector<Partition> sampled_partitions(const Trace& trace, std::size_t t) {
  if (t >= trace.T) throw std::out_of_range("sampled_partitions: time index out of range");
  std::vector<Partition> out;
  std::map<std::vector<int>, bool> seen;
  for (const auto& d : trace.draws) {
    Partition p(d.alloc.row(t));
    if (seen.emplace(p.labels(), true).second) out.push_back(std::move(p));
  }
  return out;
}

double binder_loss(const Partition& partition, const CoClusteringMatrix& cc) {
  const std::size_t n = partition.size();
  if (cc.probs.rows() != n) throw std::invalid_argument("binder_loss: size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      loss += std::fabs((partition.same_block(i, j) ? 1.0 : 0.0) - cc.probs(i, j));
  return loss;
}

BinderResult binder_partition(const CoClusteringMatrix& cc, std::span<const Partition> candidates) {
  if (candidates.empty()) throw std::invalid_argument("binder_partition: no candidates");
  std::size_t best = 0;
  double best_loss = binder_loss(candidates[0], cc);
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double loss = binder_loss(candidates[c], cc);
    // Losses are sums of O(n^2) terms; compare with a relative slack so
    // equal-loss candidates fall through to the tie-break.
    const double slack = 1e-12 * std::max(1.0, best_loss);
    if (loss < best_loss - slack ||
        (std::fabs(loss - best_loss) <= slack &&
         candidates[c].num_blocks() < candidates[best].num_blocks())) {
      best = c;
      best_loss = loss;
    }
  }
  return {candidates[best], best_loss};
}

BinderResult binder_partition_exhaustive(const CoClusteringMatrix& cc) {
  if (cc.probs.rows() > 10)
    throw std::invalid_argument("binder_partition_exhaustive: n must be <= 10");
  const auto all = enumerate_partitions(cc.probs.rows());
  return binder_partition(cc, all);
}

std::string_view to_string(ClusterLabel label) noexcept {
  switch (label) {
    case ClusterLabel::Man: return "man";
    case ClusterLabel::Neutral: return "neutral";
    case ClusterLabel::Woman: return "woman";
  }
  return "unknown";
}

ClusterLabel label_cluster(double mean, double sd) noexcept {
  if (mean < 0.0 && mean + sd < 0.0) return ClusterLabel::Man;
  if (mean > 0.0 && mean - sd > 0.0) return ClusterLabel::Woman;
  return ClusterLabel::Neutral;
}

std::vector<ClusterSummary> label_clusters(std::span<const double> values,
                                           const Partition& partition) {
  if (values.size() != partition.size())
    throw std::invalid_argument("label_clusters: partition does not cover the values");
  const std::size_t K = partition.num_blocks();
  std::vector<ClusterSummary> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    out[k].cluster = k;
    out[k].size = partition.block_sizes()[k];
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out[static_cast<std::size_t>(partition.labels()[i])].mean += values[i];
  for (auto& c : out) c.mean /= static_cast<double>(c.size);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& c = out[static_cast<std::size_t>(partition.labels()[i])];
    c.sd += (values[i] - c.mean) * (values[i] - c.mean);
  }
  for (auto& c : out) {
    c.sd = c.size > 1 ? std::sqrt(c.sd / static_cast<double>(c.size - 1)) : 0.0;
    c.label = label_cluster(c.mean, c.sd);
  }
  return out;
}

std::vector<ClusterSummary> label_clusters(const Dataset& data, const Partition& partition,
                                           std::size_t t) {
  if (t >= data.num_times()) throw std::out_of_range("label_clusters: time index out of range");
  return label_clusters(data.values().row(t), partition);
}

std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw std::invalid_argument("linear_grid: need hi > lo, >= 2 points");
  std::vector<double> g(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

std::vector<double> default_grid(const Dataset& data, std::size_t t, std::size_t points) {
  if (t >= data.num_times()) throw std::out_of_range("default_grid: time index out of range");
  const auto row = data.values().row(t);
  if (row.empty()) return linear_grid(-5.0, 5.0, points);
  const auto [mn, mx] = std::minmax_element(row.begin(), row.end());
  const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
  double ss = 0.0;
  for (double v : row) ss += (v - mean) * (v - mean);
  double sd = row.size() > 1 ? std::sqrt(ss / static_cast<double>(row.size() - 1)) : 1.0;
  if (!(sd > 0.0)) sd = 1.0;
  return linear_grid(*mn - 3.0 * sd, *mx + 3.0 * sd, points);
}

DensityGrid posterior_predictive_grid(const Trace& trace, std::size_t t,
                                      std::span<const double> grid,
                                      std::span<const double> covariate_profile) {
  if (grid.empty()) throw std::invalid_argument("posterior_predictive_grid: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument("posterior_predictive_grid: grid must be strictly increasing");
  if (t >= trace.T) throw std::out_of_range("posterior_predictive_grid: time index out of range");
  if (trace.draws.empty()) throw std::invalid_argument("posterior_predictive_grid: empty trace");
  if (!covariate_profile.empty() && covariate_profile.size() != trace.p)
    throw std::invalid_argument("posterior_predictive_grid: covariate profile has wrong length");

  DensityGrid out{t, std::vector<double>(grid.begin(), grid.end()),
                  std::vector<double>(grid.size(), 0.0)};
  const std::size_t J = trace.J;
  std::vector<double> mu(J), prec(J);
  const auto& k = kernels::active();
  for (const auto& d : trace.draws) {
    double offset = 0.0;
    for (std::size_t c = 0; c < covariate_profile.size(); ++c)
      offset += covariate_profile[c] * d.beta(t, c);
    for (std::size_t h = 0; h < J; ++h) {
      mu[h] = d.comps[h].mu + offset;
      prec[h] = trace.base.kernel_lambda * d.comps[h].tau;
    }
    k.mixture_density(grid.data(), grid.size(), d.weights.row(t).data(), mu.data(), prec.data(),
                      J, out.values.data());
  }
  const double inv = 1.0 / static_cast<double>(trace.draws.size());
  for (double& v : out.values) v *= inv;
  return out;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size()) throw std::invalid_argument("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  return s;
}

double hellinger_distance(std::span<const double> f, std::span<const double> g,
                          std::span<const double> grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::invalid_argument("hellinger_distance: densities and grid must share one grid");
  std::vector<double> sq(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (f[i] < 0.0 || g[i] < 0.0)
      throw std::invalid_argument("hellinger_distance: densities must be non-negative");
    const double d = std::sqrt(f[i]) - std::sqrt(g[i]);
    sq[i] = d * d;
  }
  return std::clamp(std::sqrt(0.5 * trapezoid(grid, sq)), 0.0, 1.0);
}

Matrix<double> prior_hellinger_study(const HellingerStudySpec& spec, std::size_t T,
                                     std::size_t replications, Rng& rng) {
  if (T < 2) throw std::invalid_argument("prior_hellinger_study: need T >= 2");
  if (replications == 0) throw std::invalid_argument("prior_hellinger_study: replications >= 1");
  if (!(spec.atom_hi > spec.atom_lo)) throw std::invalid_argument("prior_hellinger_study: bad G0");
  const WeightProcess process = make_weight_process(spec.process, spec.psi, spec.mass);
  const std::size_t J = spec.truncation;
  const auto grid = linear_grid(spec.atom_lo - 8.0, spec.atom_hi + 8.0, spec.grid_points);
  const std::vector<double> prec(J, 1.0);
  std::vector<double> atoms(J);
  std::vector<std::vector<double>> dens(T, std::vector<double>(grid.size()));
  const auto& k = kernels::active();

  Matrix<double> out(replications, T - 1);
  for (std::size_t rep = 0; rep < replications; ++rep) {
    for (double& a : atoms) a = spec.atom_lo + (spec.atom_hi - spec.atom_lo) * rng.uniform();
    const WeightMatrix w = sample_weight_paths(process, T, J, rng);
    for (std::size_t t = 0; t < T; ++t) {
      std::fill(dens[t].begin(), dens[t].end(), 0.0);
      k.mixture_density(grid.data(), grid.size(), w.row(t).data(), atoms.data(), prec.data(), J,
                        dens[t].data());
    }
    for (std::size_t t = 1; t < T; ++t) out(rep, t - 1) = hellinger_distance(dens[t], dens[0], grid);
  }
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PosteriorSummary summarize_draws(std::span<const double> draws) {
  if (draws.empty()) throw std::invalid_argument("summarize_draws: no draws");
  std::vector<double> v(draws.begin(), draws.end());
  PosteriorSummary s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile(v, 0.5);
  s.lower95 = quantile(v, 0.025);
  s.upper95 = quantile(v, 0.975);
  s.prob_positive = static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) {
                      return x > 0.0;
                    })) /
                    static_cast<double>(v.size());
  return s;
}

}  // namespace ar1dp
