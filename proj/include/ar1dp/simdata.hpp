#pragma once

// Seeded generators for the seven two-cluster / one-cluster simulation
// scenarios, with their ground-truth partitions.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ar1dp/mixture_model.hpp"
#include "ar1dp/random_measure.hpp"

namespace ar1dp {

struct ScenarioOutput {
  int scenario = 0;
  Dataset dataset;
  std::vector<Partition> true_partitions;  // one per time
  Matrix<int> true_cluster;                // T x n, generating cluster (0 or 1)
};

struct ScenarioOverrides {
  std::optional<std::size_t> n;
  std::optional<std::size_t> T;
};

inline constexpr int kNumScenarios = 7;

/// Default horizon of a scenario: 4 for scenarios 1-5, 2 for 6-7.
std::size_t scenario_default_times(int id);

/// Generates scenario `id` (1..7). Units 0..n/2-1 start in the first cluster.
/// Scenarios 4 and 5 switch each unit independently with probability 0.5 and
/// 0.2 at every t >= 2. T may only be overridden for scenarios 1 and 2, or
/// shortened for the others.
ScenarioOutput generate_scenario(int id, std::uint64_t seed, const ScenarioOverrides& overrides = {});

/// Synthetic panel shaped like the occupation bias data: units split evenly
/// into groups centred at -1, 0 and 1 (sd 0.3); at each later time a unit
/// changes group with probability 0.1. Scenario id is 0.
ScenarioOutput generate_gender_like(std::uint64_t seed, std::size_t n = 76, std::size_t T = 3);

}  // namespace ar1dp
