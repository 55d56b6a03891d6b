// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "galw/error.hpp"
#include "galw/grouping.hpp"
#include "oracles.hpp"

using namespace galw;
using namespace galw::grouping;

namespace {

std::vector<GradTrace> traces_of(const std::vector<std::vector<double>>& rows) {
  std::vector<GradTrace> out;
  for (std::size_t t = 0; t < rows.size(); ++t) out.push_back(GradTrace{static_cast<int>(t), rows[t]});
  return out;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_SUITE("grouping") {

TEST_CASE("gradient magnitude is the mean per-tensor L2 norm") {
  std::vector<double> a{3.0, 0.0}, b{0.0, 5.0};
  std::vector<std::span<const double>> two{a, b};
  CHECK(gradient_magnitude(two) == 4.0);
  std::vector<double> c{3.0, 4.0};
  std::vector<std::span<const double>> one{c};
  CHECK(gradient_magnitude(one) == 5.0);
  std::vector<double> z(7, 0.0);
  std::vector<std::span<const double>> zero{z, z};
  CHECK(gradient_magnitude(zero) == 0.0);
  CHECK_THROWS_AS(gradient_magnitude(std::span<const std::span<const double>>{}), ContractError);
}

TEST_CASE("gradient magnitude reads tensor gradients, not values") {
  auto t = ad::Tensor::from({2}, {100.0, 100.0}, true);
  t.grad()[0] = 3.0;
  t.grad()[1] = 4.0;
  std::vector<ad::Tensor> shared{t};
  CHECK(gradient_magnitude(shared) == 5.0);
  CHECK_THROWS_AS(gradient_magnitude(std::span<const ad::Tensor>{}), ContractError);
}

TEST_CASE("average slope worked examples") {
  CHECK(average_slope(GradTrace{0, {4, 3, 2, 1}}) == -1.0);
  CHECK(average_slope(GradTrace{0, {2, 2, 2}}) == 0.0);
  CHECK(average_slope(GradTrace{0, {1.0, 0.5, 0.25, 0.125}}) == doctest::Approx(-0.2916667).epsilon(1e-7));
  CHECK_THROWS_AS(average_slope(GradTrace{3, {1.0}}), ContractError);
  CHECK_THROWS_AS(average_slope(GradTrace{3, {}}), ContractError);
}

TEST_CASE("average slope equals the telescoped form on random traces") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::uniform_int_distribution<std::size_t> len(2, 60);
  for (int rep = 0; rep < 1000; ++rep) {
    GradTrace tr{0, std::vector<double>(len(rng))};
    for (auto& g : tr.gammas) g = u(rng);
    const double telescoped =
        (tr.gammas.back() - tr.gammas.front()) / static_cast<double>(tr.gammas.size() - 1);
    CHECK(average_slope(tr) == telescoped);
    CHECK(oracle::rel_err(average_slope(tr), oracle::slope_by_differences(tr.gammas)) < 1e-12);
  }
}

TEST_CASE("slope transform worked examples and shape") {
  CHECK(transform_slope(-1.0) == -0.5);
  CHECK(transform_slope(0.0) == 0.0);
  CHECK(transform_slope(1.0) == 0.5);
  CHECK(transform_slope(-std::exp(1.0)) == doctest::Approx(-0.7310586).epsilon(1e-7));
  for (double s : {1e-9, 0.3, 2.0, 1e4}) {
    CHECK(transform_slope(-s) == -transform_slope(s));
    CHECK(transform_slope(s) < transform_slope(s * 1.5));
  }
  CHECK(transform_slope(1e12) <= 1.0);
  CHECK(transform_slope(1e12) > 0.999);
  CHECK(std::abs(transform_slope(1e-12)) < 1e-11);
  CHECK(std::abs(transform_slope(1e-310)) < 1e-300);
}

TEST_CASE("slope transform matches long double evaluation on a log grid") {
  double worst = 0.0;
  for (int i = 0; i <= 1800; ++i) {
    const double s = std::pow(10.0, -12.0 + 18.0 * i / 1800.0);
    for (double sign : {1.0, -1.0}) {
      const double got = transform_slope(sign * s);
      const auto want = static_cast<double>(oracle::transform_slope_ld(static_cast<long double>(sign * s)));
      worst = std::max(worst, std::abs(got - want));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("clustering edge cases: G = 1 and G = T") {
  const std::vector<double> v{0.3, -0.2, 0.9, 0.1};
  const auto one = agglomerative_cluster(v, 1);
  CHECK(one.assignment == std::vector<std::size_t>(4, 0));
  CHECK(one.merges.size() == 3);
  const auto all = agglomerative_cluster(v, 4);
  CHECK(all.assignment == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(all.merges.empty());
  CHECK_THROWS_AS(agglomerative_cluster(v, 0), ContractError);
  CHECK_THROWS_AS(agglomerative_cluster(v, 5), ContractError);
}

TEST_CASE("two well separated pairs split the way brute force says") {
  const std::vector<double> v{-0.90, -0.88, -0.12, -0.10};
  const auto g = agglomerative_cluster(v, 2);
  CHECK(g.assignment == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(oracle::set_partitions(4, 2).size() == 7);
  CHECK(oracle::min_max_diameter_partition(v, 2) == g.assignment);
  CHECK(group_details(g) == "{t0, t1}, {t2, t3}");
}

TEST_CASE("complete linkage equals the naive reference for T <= 8, every G") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<std::size_t> size(1, 8);
  std::uniform_int_distribution<int> coarse(-4, 4);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t T = size(rng);
    std::vector<double> v = random_values(rng, T);
    // Every fifth vector is coarsely quantized so distances tie often.
    if (rep % 5 == 0) {
      for (auto& x : v) x = 0.25 * coarse(rng);
    }
    for (std::size_t G = 1; G <= T; ++G) {
      const auto got = agglomerative_cluster(v, G, Linkage::Complete);
      REQUIRE(got.assignment == oracle::naive_complete_linkage(v, G));
      CHECK_NOTHROW(validate(got));
    }
  }
}

TEST_CASE("ties merge the lexicographically smallest pair first") {
  const std::vector<double> v{0.0, 1.0, 2.0, 3.0};
  CHECK(agglomerative_cluster(v, 3).assignment == std::vector<std::size_t>{0, 0, 1, 2});
  const std::vector<double> same(5, 0.4);
  CHECK(agglomerative_cluster(same, 2).assignment == std::vector<std::size_t>{0, 0, 0, 0, 1});
}

TEST_CASE("clustering depends on values only, not on task order") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 100; ++rep) {
    const auto v = random_values(rng, 7);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pv(7);
    for (std::size_t i = 0; i < 7; ++i) pv[i] = v[perm[i]];
    for (std::size_t G = 1; G <= 7; ++G) {
      const auto a = agglomerative_cluster(v, G).assignment;
      const auto b = agglomerative_cluster(pv, G).assignment;
      // Same partition up to relabeling: tasks i, j share a group in one iff
      // they do in the other.
      for (std::size_t i = 0; i < 7; ++i) {
        for (std::size_t j = 0; j < 7; ++j) {
          REQUIRE((a[perm[i]] == a[perm[j]]) == (b[i] == b[j]));
        }
      }
    }
  }
}

TEST_CASE("single and average linkage produce valid partitions") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const auto v = random_values(rng, 6);
    for (auto link : {Linkage::Single, Linkage::Average}) {
      for (std::size_t G = 1; G <= 6; ++G) {
        const auto g = agglomerative_cluster(v, G, link);
        CHECK_NOTHROW(validate(g));
        CHECK(g.linkage == link);
      }
    }
  }
  CHECK(parse_linkage("average") == Linkage::Average);
  CHECK_THROWS_AS(parse_linkage("ward"), ContractError);
}

TEST_CASE("build_grouping composes slope, transform and clustering") {
  const auto tr = traces_of({{4, 3, 2, 1}, {4.1, 3.1, 2.1, 1.1}, {1, 1, 1, 1}});
  const auto g = build_grouping(tr, 2);
  CHECK(g.assignment == std::vector<std::size_t>{0, 0, 1});
  REQUIRE(g.slopes.size() == 3);
  CHECK(g.slopes[0].s == -1.0);
  CHECK(g.slopes[1].s == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(g.slopes[2].s_star == 0.0);
  CHECK(g.slopes[0].s_star == -0.5);
  std::vector<double> stars{g.slopes[0].s_star, g.slopes[1].s_star, g.slopes[2].s_star};
  CHECK(oracle::min_max_diameter_partition(stars, 2) == g.assignment);
  CHECK(g.strategy == "slope");
}

TEST_CASE("build_grouping is a pure function of the traces") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<std::vector<double>> rows(6, std::vector<double>(5));
  for (auto& r : rows) {
    for (auto& x : r) x = u(rng);
  }
  const auto a = build_grouping(traces_of(rows), 3);
  const auto b = build_grouping(traces_of(rows), 3);
  CHECK(a.assignment == b.assignment);
  CHECK(group_table(a) == group_table(b));
}

TEST_CASE("identical traces split by tie-break only") {
  const auto tr = traces_of({{3, 2}, {3, 2}, {3, 2}, {3, 2}});
  CHECK(build_grouping(tr, 1).assignment == std::vector<std::size_t>(4, 0));
  CHECK(build_grouping(tr, 3).assignment == std::vector<std::size_t>{0, 0, 1, 2});
}

TEST_CASE("malformed traces are rejected") {
  CHECK_THROWS_AS(build_grouping(std::vector<GradTrace>{}, 1), ContractError);
  CHECK_THROWS_AS(build_grouping(traces_of({{1, 2}, {1, 2, 3}}), 1), ContractError);
  CHECK_THROWS_AS(build_grouping(traces_of({{1, -2}, {1, 2}}), 1), ContractError);
  CHECK_THROWS_AS(build_grouping(traces_of({{1, NAN}, {1, 2}}), 1), ContractError);
  CHECK_THROWS_AS(build_grouping(traces_of({{1}, {1}}), 1), ContractError);
  auto tr = traces_of({{1, 2}, {1, 2}});
  tr[1].task_id = 5;
  CHECK_THROWS_AS(build_grouping(tr, 1), ContractError);
  CHECK_THROWS_AS(build_grouping(traces_of({{1, 2}, {2, 3}}), 3), ContractError);
}

TEST_CASE("random grouping: exactly G nonempty groups, seed-determined") {
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto g = random_grouping(6, 3, seed);
    CHECK_NOTHROW(validate(g));
    CHECK(g.strategy == "random");
    CHECK(g.assignment == random_grouping(6, 3, seed).assignment);
    seen.insert(g.assignment);
  }
  CHECK(seen.size() > 10);
  CHECK_THROWS_AS(random_grouping(3, 4, 1), ContractError);
}

TEST_CASE("explicit grouping must partition the tasks") {
  const auto g = explicit_grouping({{2, 0}, {1}}, 3);
  CHECK(g.assignment == std::vector<std::size_t>{0, 1, 0});
  CHECK(g.strategy == "explicit");
  CHECK_THROWS_AS(explicit_grouping({{0, 1}, {1, 2}}, 3), ContractError);
  CHECK_THROWS_AS(explicit_grouping({{0}, {}}, 1), ContractError);
  CHECK_THROWS_AS(explicit_grouping({{0, 7}}, 3), ContractError);
  try {
    explicit_grouping({{1}}, 4);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("[0,2,3]") != std::string::npos);
  }
}

TEST_CASE("validate catches broken partitions") {
  Grouping g;
  g.num_groups = 2;
  g.assignment = {0, 0, 0};
  CHECK_THROWS_AS(validate(g), ContractError);
  g.assignment = {0, 2, 1};
  CHECK_THROWS_AS(validate(g), ContractError);
  g.assignment = {0, 1, 1};
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("group table lists every group and slope") {
  const auto g = build_grouping(traces_of({{4, 3, 2, 1}, {4, 3, 2, 1}, {1, 1, 1, 1}}), 2);
  const auto table = group_table(g);
  CHECK(table.find("{t0, t1}, {t2}") != std::string::npos);
  CHECK(table.find("complete") != std::string::npos);
  CHECK(table.find("-0.5") != std::string::npos);
}

}  // TEST_SUITE
