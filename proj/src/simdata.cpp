#include "ar1dp/simdata.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "ar1dp/rng.hpp"

namespace ar1dp {
namespace {

struct ClusterLaw {
  double mean;
  double variance;
};

// Cluster laws per time for scenarios whose laws follow a fixed schedule.
constexpr std::array<std::array<ClusterLaw, 2>, 4> kMovingMeans{{
    {{{-80.0, 1.0}, {80.0, 1.0}}},
    {{{-60.0, 1.0}, {20.0, 1.0}}},
    {{{-40.0, 1.0}, {40.0, 1.0}}},
    {{{-20.0, 1.0}, {60.0, 1.0}}},
}};

void check_id(int id) {
  if (id < 1 || id > kNumScenarios)
    throw std::invalid_argument("unknown scenario " + std::to_string(id) +
                                " (valid range 1-" + std::to_string(kNumScenarios) + ")");
}

}  // namespace

std::size_t scenario_default_times(int id) {
  check_id(id);
  return id <= 5 ? 4 : 2;
}

ScenarioOutput generate_scenario(int id, std::uint64_t seed, const ScenarioOverrides& overrides) {
  check_id(id);
  const std::size_t n = overrides.n.value_or(100);
  const std::size_t default_T = scenario_default_times(id);
  const std::size_t T = overrides.T.value_or(default_T);
  if (n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  if (T == 0) throw std::invalid_argument("scenario: T must be >= 1");
  if (id >= 3 && T > default_T)
    throw std::invalid_argument("scenario " + std::to_string(id) + " defines at most " +
                                std::to_string(default_T) + " time points");

  Rng rng(seed);
  const std::size_t half = n / 2;
  Matrix<int> cluster(T, n, 0);
  for (std::size_t j = half; j < n; ++j) cluster(0, j) = 1;

  const double switch_prob = id == 4 ? 0.5 : id == 5 ? 0.2 : 0.0;
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      int c = cluster(t - 1, j);
      if (switch_prob > 0.0 && rng.uniform() < switch_prob) c = 1 - c;
      cluster(t, j) = c;
    }

  auto law = [&](std::size_t t, int c) -> ClusterLaw {
    switch (id) {
      case 1: return {0.0, 1.0};
      case 2: return c == 0 ? ClusterLaw{-80.0, 1.0} : ClusterLaw{-40.0, 4.0};
      case 3:
      case 4:
      case 5: return kMovingMeans[t][static_cast<std::size_t>(c)];
      case 6:
        if (t == 0) return {-80.0, 1.0};
        return c == 0 ? ClusterLaw{-40.0, 1.0} : ClusterLaw{40.0, 1.0};
      case 7:
        if (t == 0) return c == 0 ? ClusterLaw{-40.0, 1.0} : ClusterLaw{40.0, 1.0};
        return {-80.0, 1.0};
    }
    return {0.0, 1.0};
  };
  auto single_cluster = [&](std::size_t t) {
    return id == 1 || (id == 6 && t == 0) || (id == 7 && t == 1);
  };

  // Times generated from a single law collapse to one block.
  Matrix<double> y(T, n);
  for (std::size_t t = 0; t < T; ++t) {
    if (single_cluster(t))
      for (std::size_t j = 0; j < n; ++j) cluster(t, j) = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const ClusterLaw l = law(t, cluster(t, j));
      y(t, j) = rng.normal(l.mean, std::sqrt(l.variance));
    }
  }
  ScenarioOutput out;
  out.scenario = id;
  out.dataset = Dataset(std::move(y));
  for (std::size_t t = 0; t < T; ++t) {
    out.dataset.time_labels.push_back(std::to_string(t + 1));
    out.true_partitions.emplace_back(cluster.row(t));
  }
  for (std::size_t j = 0; j < n; ++j) out.dataset.unit_labels.push_back(std::to_string(j + 1));
  out.true_cluster = std::move(cluster);
  return out;
}

ScenarioOutput generate_gender_like(std::uint64_t seed, std::size_t n, std::size_t T) {
  if (n < 3) throw std::invalid_argument("gender-like panel: n must be >= 3");
  if (T == 0) throw std::invalid_argument("gender-like panel: T must be >= 1");
  constexpr std::array<double, 3> kCentres{-1.0, 0.0, 1.0};
  constexpr double kSd = 0.3;
  constexpr double kMoveProb = 0.1;

  Rng rng(seed);
  Matrix<int> group(T, n, 0);
  for (std::size_t j = 0; j < n; ++j) group(0, j) = static_cast<int>(j * 3 / n);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      int g = group(t - 1, j);
      // Moves only ever go one step toward neutral or away from it.
      if (rng.uniform() < kMoveProb) g = g == 1 ? (rng.uniform() < 0.5 ? 0 : 2) : 1;
      group(t, j) = g;
    }

  Matrix<double> y(T, n);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j)
      y(t, j) = rng.normal(kCentres[static_cast<std::size_t>(group(t, j))], kSd);

  ScenarioOutput out;
  out.dataset = Dataset(std::move(y));
  for (std::size_t t = 0; t < T; ++t) {
    out.dataset.time_labels.push_back(std::to_string(1900 + 50 * t));
    out.true_partitions.emplace_back(group.row(t));
  }
  for (std::size_t j = 0; j < n; ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "occ%03zu", j + 1);
    out.dataset.unit_labels.emplace_back(name);
  }
  out.true_cluster = std::move(group);
  return out;
}

}  // namespace ar1dp
