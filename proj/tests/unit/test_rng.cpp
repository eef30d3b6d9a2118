#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

#include "rbm/errors.hpp"
#include "rbm/rng.hpp"

using namespace rbm;

namespace {

double sample_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = std::array<std::uint32_t, 4>;
  using K = std::array<std::uint32_t, 2>;
  CHECK(philox4x32(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("derive_seed separates tags and parents") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("counter stream uniforms and bounded integers") {
  CounterStream s(7, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 1.0);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[s.below(5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("noise plan: single step of a unit horizon") {
  const NoisePlan plan(1, 1, 1, 1.0, 0);
  CHECK(plan.steps(0) == 1);
  CHECK(plan.dt(0) == 1.0);
  const auto inc = plan.increments(0, 0);
  REQUIRE(inc.size() == 1);
  CHECK(std::isfinite(inc[0]));
  CHECK(inc[0] == plan.fine_increment(0, 0, 0));
}

TEST_CASE("noise plan: equal seeds give identical increments") {
  const NoisePlan a(42, 3, 2, 1.0, 4);
  const NoisePlan b(42, 3, 2, 1.0, 4);
  const NoisePlan c(43, 3, 2, 1.0, 4);
  for (std::size_t k = 0; k < 16; ++k) CHECK(a.increments(4, k) == b.increments(4, k));
  CHECK(a.increments(4, 0) != c.increments(4, 0));
}

TEST_CASE("noise plan: finest level returns fine increments verbatim") {
  const NoisePlan plan(9, 4, 1, 2.0, 3);
  for (std::size_t k = 0; k < plan.steps(3); ++k) {
    const auto inc = plan.increments(3, k);
    for (std::size_t i = 0; i < 4; ++i) CHECK(inc[i] == plan.fine_increment(i, 0, k));
  }
}

TEST_CASE("noise plan: coarse increments are bitwise sums of their halves") {
  const NoisePlan plan(5, 3, 2, 1.0, 5);
  for (std::size_t level = 0; level < 5; ++level) {
    for (std::size_t k = 0; k < plan.steps(level); ++k) {
      const auto coarse = plan.increments(level, k);
      const auto left = plan.increments(level + 1, 2 * k);
      const auto right = plan.increments(level + 1, 2 * k + 1);
      for (std::size_t j = 0; j < coarse.size(); ++j) CHECK(coarse[j] == left[j] + right[j]);
    }
  }
}

TEST_CASE("noise plan: block reads match single reads") {
  const NoisePlan plan(11, 5, 1, 1.0, 6);
  std::vector<double> block(10 * 5);
  plan.increments_block(4, 3, 10, block);
  for (std::size_t s = 0; s < 10; ++s) {
    const auto one = plan.increments(4, 3 + s);
    for (std::size_t i = 0; i < 5; ++i) CHECK(block[s * 5 + i] == one[i]);
  }
  NoiseCursor cursor(plan, 4, 3);
  for (std::size_t s = 0; s < 10; ++s) {
    const auto inc = cursor.next();
    for (std::size_t i = 0; i < 5; ++i) CHECK(inc[i] == block[s * 5 + i]);
  }
}

TEST_CASE("noise plan: fine increment variance at dt = 1/16") {
  const NoisePlan fine(123, 100000, 1, 0.0625, 0);
  const auto inc = fine.increments(0, 0);
  CHECK(std::abs(sample_variance(inc) - 0.0625) < 0.002);
}

TEST_CASE("noise plan: full-step increment variance at dt = 0.25") {
  const NoisePlan plan(321, 100000, 1, 0.25, 3);
  const auto inc = plan.increments(0, 0);
  CHECK(std::abs(sample_variance(inc) - 0.25) < 0.008);
}

TEST_CASE("noise plan: level lookup and range errors") {
  const NoisePlan plan(1, 2, 1, 1.0, 4);
  CHECK(plan.level_for(0.25) == 2);
  CHECK_THROWS_AS(plan.level_for(0.3), ConfigError);
  CHECK_THROWS_AS(plan.increments(2, 4), IndexError);
  CHECK_THROWS_AS(plan.increments(5, 0), IndexError);
  CHECK_THROWS_AS(plan.fine_increment(2, 0, 0), IndexError);
}

TEST_CASE("division: N=4, p=2 gives two disjoint covering pairs") {
  const PartitionPlan plan(3, 4, 2, 10);
  for (std::size_t step = 0; step < 10; ++step) {
    const Division div = plan.division(step);
    REQUIRE(div.batch_count() == 2);
    std::set<std::uint32_t> seen;
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(div.batch(c).size() == 2);
      for (auto i : div.batch(c)) seen.insert(i);
    }
    CHECK(seen == std::set<std::uint32_t>{0, 1, 2, 3});
  }
}

TEST_CASE("division: invalid sizes are rejected") {
  CHECK_THROWS_AS(PartitionPlan(1, 5, 2, 1), InvalidPartitionError);
  CHECK_THROWS_AS(PartitionPlan(1, 4, 1, 1), InvalidPartitionError);
  CHECK_THROWS_AS(Division({0, 1, 1, 3}, 2), InvalidPartitionError);
  CHECK_THROWS_AS(Division::from_batches({{0, 1}, {2}}), InvalidPartitionError);
  CHECK_THROWS_AS(Division::from_batches({{0, 1}, {1, 2}}), InvalidPartitionError);
  CHECK_THROWS_AS(PartitionPlan(1, 4, 2, 3).division(3), IndexError);
  CHECK_NOTHROW(Division::from_batches({{2, 0}, {1, 3}}));
}

TEST_CASE("division: pair co-membership is uniform") {
  // Each partner j != i shares a batch with i with probability (p-1)/(N-1).
  const std::size_t n = 8, p = 2, steps = 20000;
  const PartitionPlan plan(17, n, p, steps);
  std::vector<int> together(n, 0);
  for (std::size_t s = 0; s < steps; ++s) {
    const Division div = plan.division(s);
    for (std::size_t c = 0; c < div.batch_count(); ++c) {
      const auto b = div.batch(c);
      if (b[0] == 0) ++together[b[1]];
      if (b[1] == 0) ++together[b[0]];
    }
  }
  const double expected = static_cast<double>(steps) / 7.0;
  for (std::size_t j = 1; j < n; ++j) CHECK(std::abs(together[j] - expected) < 5.0 * std::sqrt(expected));
}

TEST_CASE("division: plans are reproducible from the seed") {
  const PartitionPlan a(99, 16, 4, 5), b(99, 16, 4, 5), c(100, 16, 4, 5);
  auto order_of = [](const PartitionPlan& plan, std::size_t step) {
    const Division div = plan.division(step);
    return std::vector<std::uint32_t>(div.order().begin(), div.order().end());
  };
  CHECK(order_of(a, 2) == order_of(b, 2));
  bool differs = false;
  for (std::size_t s = 0; s < 5; ++s) differs = differs || order_of(a, s) != order_of(c, s);
  CHECK(differs);
}
