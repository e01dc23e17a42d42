#include "ar1dp/random_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <stdexcept>
#include <unordered_map>

#include "ar1dp/normal.hpp"

namespace ar1dp {

std::vector<double> stick_break(std::span<const double> xi, std::size_t J) {
  if (J < 2) throw std::invalid_argument("stick_break: truncation J must be >= 2");
  if (xi.size() != J - 1) throw std::invalid_argument("stick_break: expected J - 1 sticks");
  std::vector<double> w(J);
  double rest = 1.0;
  double used = 0.0;
  for (std::size_t l = 0; l + 1 < J; ++l) {
    if (!(xi[l] > 0.0 && xi[l] < 1.0))
      throw std::invalid_argument("stick_break: stick variables must lie in (0, 1)");
    w[l] = xi[l] * rest;
    used += w[l];
    rest *= 1.0 - xi[l];
  }
  w[J - 1] = std::max(0.0, 1.0 - used);
  return w;
}

WeightMatrix weights_from_eps(const EpsPath& eps, double mass) {
  const CopulaSpec spec(mass);
  const std::size_t J = eps.cols() + 1;
  WeightMatrix w(eps.rows(), J);
  std::vector<double> xi(eps.cols());
  for (std::size_t t = 0; t < eps.rows(); ++t) {
    for (std::size_t l = 0; l < eps.cols(); ++l) xi[l] = copula_transform(eps(t, l), spec);
    const auto row = stick_break(xi, J);
    std::copy(row.begin(), row.end(), w.row(t).begin());
  }
  return w;
}

WeightMatrix sample_weight_paths(const WeightProcess& process, std::size_t T, std::size_t J,
                                 Rng& rng) {
  if (J < 2) throw std::invalid_argument("sample_weight_paths: J must be >= 2");
  const Matrix<double> xi = sample_stick_paths(process, T, J - 1, rng);
  WeightMatrix w(T, J);
  for (std::size_t t = 0; t < T; ++t) {
    // Sticks that round to 0 or 1 are pulled inside the open interval.
    std::vector<double> row(xi.row(t).begin(), xi.row(t).end());
    for (double& v : row) v = std::clamp(v, std::numeric_limits<double>::min(),
                                         std::nextafter(1.0, 0.0));
    const auto wt = stick_break(row, J);
    std::copy(wt.begin(), wt.end(), w.row(t).begin());
  }
  return w;
}

WeightMatrix sample_weight_paths(WeightProcessKind kind, double psi, double mass, std::size_t T,
                                 std::size_t J, Rng& rng) {
  return sample_weight_paths(make_weight_process(kind, psi, mass), T, J, rng);
}

double allocation_log_likelihood(std::span<const double> eps, std::span<const double> counts,
                                 double mass) {
  if (counts.size() != eps.size() + 1)
    throw std::invalid_argument("allocation_log_likelihood: counts must have J = L + 1 entries");
  // sum_h c_h log w_h = sum_l [c_l log xi_l + (sum_{h>l} c_h) log(1 - xi_l)]
  std::size_t last = counts.size();
  while (last > 0 && counts[last - 1] == 0.0) --last;
  if (last == 0) return 0.0;
  double above = 0.0;
  for (std::size_t h = 0; h < last; ++h) above += counts[h];
  const double inv_mass = 1.0 / mass;
  double ll = 0.0;
  const std::size_t sticks = std::min(last, eps.size());
  for (std::size_t l = 0; l < sticks; ++l) {
    above -= counts[l];
    const double log_rest = log_normal_sf(eps[l]) * inv_mass;
    if (counts[l] > 0.0) ll += counts[l] * std::log(-std::expm1(log_rest));
    if (above > 0.0) ll += above * log_rest;
  }
  return ll;
}

double eppf_log_prob(std::span<const std::size_t> block_sizes, double mass) {
  if (block_sizes.empty()) throw std::invalid_argument("eppf_log_prob: empty partition");
  if (!(mass > 0.0)) throw std::invalid_argument("eppf_log_prob: mass must be positive");
  std::size_t n = 0;
  double lp = static_cast<double>(block_sizes.size()) * std::log(mass);
  for (std::size_t s : block_sizes) {
    if (s == 0) throw std::invalid_argument("eppf_log_prob: block sizes must be >= 1");
    lp += std::lgamma(static_cast<double>(s));
    n += s;
  }
  lp -= std::lgamma(mass + static_cast<double>(n)) - std::lgamma(mass);
  return lp;
}

double expected_num_clusters(std::size_t n, double mass) {
  if (n == 0) throw std::invalid_argument("expected_num_clusters: n must be >= 1");
  if (!(mass > 0.0)) throw std::invalid_argument("expected_num_clusters: mass must be positive");
  double k = 0.0;
  for (std::size_t i = 1; i <= n; ++i) k += mass / (mass + static_cast<double>(i - 1));
  return k;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  for (double p : probs) total += p;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding at the top end: last index with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

Partition::Partition(std::span<const int> labels) : labels_(labels.size()) {
  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    if (inserted) sizes_.push_back(0);
    labels_[i] = it->second;
    ++sizes_[static_cast<std::size_t>(it->second)];
  }
}

std::vector<Partition> enumerate_partitions(std::size_t n) {
  std::vector<Partition> out;
  if (n == 0) return out;
  std::vector<int> rgs(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int max_label) {
    if (i == n) {
      out.emplace_back(std::span<const int>(rgs));
      return;
    }
    for (int b = 0; b <= max_label + 1; ++b) {
      rgs[i] = b;
      rec(i + 1, std::max(max_label, b));
    }
  };
  rec(1, 0);
  return out;
}

}  // namespace ar1dp
