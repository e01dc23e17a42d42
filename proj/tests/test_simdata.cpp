#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "ar1dp/simdata.hpp"

using namespace ar1dp;

namespace {

struct ClusterStats {
  double mean = 0.0;
  double count = 0.0;
};

ClusterStats stats_of(const ScenarioOutput& s, std::size_t t, int cluster) {
  ClusterStats c;
  for (std::size_t j = 0; j < s.dataset.num_units(); ++j)
    if (s.true_cluster(t, j) == cluster) {
      c.mean += s.dataset.y(t, j);
      c.count += 1.0;
    }
  if (c.count > 0) c.mean /= c.count;
  return c;
}

void check_mean(const ScenarioOutput& s, std::size_t t, int cluster, double expected, double sd) {
  const auto c = stats_of(s, t, cluster);
  REQUIRE(c.count > 0);
  CHECK(std::abs(c.mean - expected) < 4.0 * sd / std::sqrt(c.count));
}

}  // namespace

TEST_CASE("scenario dimensions") {
  for (int id = 1; id <= kNumScenarios; ++id) {
    const auto s = generate_scenario(id, 1);
    CHECK(s.scenario == id);
    CHECK(s.dataset.num_units() == 100);
    CHECK(s.dataset.num_times() == (id <= 5 ? 4u : 2u));
    CHECK(s.true_partitions.size() == s.dataset.num_times());
    CHECK(s.true_cluster.rows() == s.dataset.num_times());
    CHECK(s.dataset.unit_labels.size() == 100);
  }
  CHECK_THROWS_AS(generate_scenario(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scenario(8, 1), std::invalid_argument);
  CHECK_THROWS_AS(scenario_default_times(-1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scenario(3, 1, {std::nullopt, 5}), std::invalid_argument);
  const auto small = generate_scenario(2, 1, {20, 6});
  CHECK(small.dataset.num_units() == 20);
  CHECK(small.dataset.num_times() == 6);
}

TEST_CASE("same seed gives identical output") {
  for (int id = 1; id <= kNumScenarios; ++id) {
    const auto a = generate_scenario(id, 42);
    const auto b = generate_scenario(id, 42);
    CHECK(a.dataset.values().storage() == b.dataset.values().storage());
    CHECK(a.true_cluster.storage() == b.true_cluster.storage());
    const auto c = generate_scenario(id, 43);
    CHECK(a.dataset.values().storage() != c.dataset.values().storage());
  }
}

TEST_CASE("scenario 1 is one standard normal block") {
  const auto s = generate_scenario(1, 3);
  for (const auto& p : s.true_partitions) CHECK(p.num_blocks() == 1);
  for (std::size_t t = 0; t < 4; ++t) check_mean(s, t, 0, 0.0, 1.0);
}

TEST_CASE("scenario 2 keeps memberships and laws fixed") {
  const auto s = generate_scenario(2, 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(s.true_partitions[t].num_blocks() == 2);
    CHECK(s.true_partitions[t] == s.true_partitions[0]);
    check_mean(s, t, 0, -80.0, 1.0);
    check_mean(s, t, 1, -40.0, 2.0);
  }
  // Variance 4 in the second cluster.
  double ss = 0.0;
  for (std::size_t j = 50; j < 100; ++j) ss += std::pow(s.dataset.y(0, j) + 40.0, 2);
  CHECK(std::abs(ss / 50.0 - 4.0) < 2.0);
}

TEST_CASE("scenarios 3 to 5 follow the moving means") {
  const double lo[4] = {-80, -60, -40, -20};
  const double hi[4] = {80, 20, 40, 60};
  for (int id : {3, 4, 5}) {
    const auto s = generate_scenario(id, 5);
    for (std::size_t t = 0; t < 4; ++t) {
      check_mean(s, t, 0, lo[t], 1.0);
      check_mean(s, t, 1, hi[t], 1.0);
    }
    if (id == 3)
      for (std::size_t t = 1; t < 4; ++t) CHECK(s.true_partitions[t] == s.true_partitions[0]);
  }
  const auto four = generate_scenario(4, 6);
  CHECK(stats_of(four, 1, 0).mean == doctest::Approx(-60.0).epsilon(0.01));
  CHECK(stats_of(four, 1, 1).mean == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("switch rates of scenarios 4 and 5") {
  for (auto [id, rate] : {std::pair{4, 0.5}, std::pair{5, 0.2}}) {
    double switches = 0.0, moves = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto s = generate_scenario(id, seed);
      for (std::size_t t = 1; t < 4; ++t)
        for (std::size_t j = 0; j < 100; ++j) {
          switches += s.true_cluster(t, j) != s.true_cluster(t - 1, j);
          moves += 1.0;
        }
    }
    CHECK(std::abs(switches / moves - rate) < 0.02 + (rate == 0.5 ? 0.01 : 0.0));
  }
}

TEST_CASE("scenarios 6 and 7 change the number of clusters") {
  const auto six = generate_scenario(6, 7);
  CHECK(six.true_partitions[0].num_blocks() == 1);
  CHECK(six.true_partitions[1].num_blocks() == 2);
  check_mean(six, 0, 0, -80.0, 1.0);
  check_mean(six, 1, 0, -40.0, 1.0);
  check_mean(six, 1, 1, 40.0, 1.0);

  const auto seven = generate_scenario(7, 7);
  CHECK(seven.true_partitions[0].num_blocks() == 2);
  CHECK(seven.true_partitions[1].num_blocks() == 1);
  check_mean(seven, 0, 0, -40.0, 1.0);
  check_mean(seven, 0, 1, 40.0, 1.0);
  check_mean(seven, 1, 0, -80.0, 1.0);
  for (std::size_t j = 0; j < 100; ++j) CHECK(std::abs(seven.dataset.y(1, j) + 80.0) < 6.0);
}

TEST_CASE("gender-like panel") {
  const auto g = generate_gender_like(11);
  CHECK(g.dataset.num_units() == 76);
  CHECK(g.dataset.num_times() == 3);
  CHECK(g.dataset.time_labels == std::vector<std::string>{"1900", "1950", "2000"});
  CHECK(g.dataset.unit_labels.front() == "occ001");
  CHECK(g.dataset.unit_labels.back() == "occ076");
  CHECK(g.true_partitions[0].num_blocks() == 3);
  const double centre[3] = {-1.0, 0.0, 1.0};
  for (std::size_t t = 0; t < 3; ++t)
    for (int k = 0; k < 3; ++k)
      if (stats_of(g, t, k).count > 0) check_mean(g, t, k, centre[k], 0.3);
  // Moves never jump between the two outer groups.
  for (std::size_t t = 1; t < 3; ++t)
    for (std::size_t j = 0; j < 76; ++j)
      CHECK(std::abs(g.true_cluster(t, j) - g.true_cluster(t - 1, j)) <= 1);
  const auto again = generate_gender_like(11);
  CHECK(again.dataset.values().storage() == g.dataset.values().storage());
  CHECK_THROWS_AS(generate_gender_like(1, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(generate_gender_like(1, 10, 0), std::invalid_argument);
}
