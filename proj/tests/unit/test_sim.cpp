#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "rbm/errors.hpp"
#include "rbm/model.hpp"
#include "rbm/rng.hpp"
#include "rbm/sim.hpp"

using namespace rbm;
using doctest::Approx;

namespace {

const double kSqrt2 = std::sqrt(2.0);

SystemState state_of(std::vector<double> x) { return SystemState::from_positions(std::move(x), 1); }

bool same_snapshots(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.snapshots.size() != b.snapshots.size()) return false;
  for (const auto& [k, s] : a.snapshots) {
    const auto it = b.snapshots.find(k);
    if (it == b.snapshots.end() || it->second.positions != s.positions) return false;
  }
  return true;
}

double max_gap(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  double worst = 0.0;
  for (const auto& [k, s] : a.snapshots) {
    const auto& t = b.snapshots.at(k);
    for (std::size_t j = 0; j < s.positions.size(); ++j) {
      worst = std::max(worst, std::abs(s.positions[j] - t.positions[j]) / (1.0 + std::abs(t.positions[j])));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("deterministic Euler steps") {
  const ForceModel ou = ForceModel::builtin(1, 1.0, 0.0, kSqrt2);
  const std::vector<double> zero2(2, 0.0);
  const auto s1 = step_em_full(state_of({1.0, -1.0}), ou, 0.5, zero2);
  CHECK(s1.positions == std::vector<double>{0.5, -0.5});
  CHECK(s1.step_index == 1);

  const auto s0 = step_em_full(state_of({0.3, -0.7}), ou, 0.0, zero2);
  CHECK(s0.positions == std::vector<double>{0.3, -0.7});

  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.1, kSqrt2);
  const auto s2 = step_em_full(state_of({1.0, -1.0}), sine, 0.1, zero2);
  CHECK(s2.positions[0] == Approx(1.0 + (-1.0 + 0.1 * std::sin(2.0)) * 0.1).epsilon(1e-14));
  CHECK(s2.positions[0] == Approx(0.90909).epsilon(1e-5));

  const std::vector<double> zero4(4, 0.0);
  const Division div = Division::from_batches({{0, 1}, {2, 3}});
  const auto s3 = step_em_batched(state_of({1.0, -1.0, 2.0, -2.0}), sine, 0.1, zero4, div);
  CHECK(s3.positions[2] == Approx(2.0 + (-2.0 + 0.1 * std::sin(4.0)) * 0.1).epsilon(1e-14));
  CHECK(s3.positions[2] == Approx(1.79243).epsilon(1e-5));
}

TEST_CASE("noise enters as sigma dW") {
  const ForceModel ou = ForceModel::builtin(1, 1.0, 0.0, 0.5);
  const auto s = step_em_full(state_of({1.0, 2.0}), ou, 0.25, std::vector<double>{0.2, -0.4});
  CHECK(s.positions[0] == 1.0 - 0.25 + 0.5 * 0.2);
  CHECK(s.positions[1] == 2.0 - 0.5 + 0.5 * -0.4);
}

TEST_CASE("batched step degenerates to the full step") {
  CounterStream rng(3, 0);
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.4, kSqrt2);
  std::vector<double> x(8), dw(8);
  for (auto& v : x) v = rng.normal();
  for (auto& v : dw) v = 0.1 * rng.normal();
  const auto full = step_em_full(state_of(x), sine, 0.05, dw);
  const auto single = step_em_batched(state_of(x), sine, 0.05, dw, Division({7, 6, 5, 4, 3, 2, 1, 0}, 8));
  for (std::size_t i = 0; i < 8; ++i) CHECK(single.positions[i] == Approx(full.positions[i]).epsilon(1e-12));

  const ForceModel free = ForceModel::builtin(1, 1.0, 0.0, kSqrt2);
  const auto f2 = step_em_full(state_of(x), free, 0.05, dw);
  const auto b2 = step_em_batched(state_of(x), free, 0.05, dw, Division({1, 0, 3, 2, 5, 4, 7, 6}, 2));
  CHECK(f2.positions == b2.positions);
}

TEST_CASE("divergence carries the step index") {
  const ForceModel stiff = ForceModel::builtin(1, 100.0, 0.0, 1.0);
  const NoisePlan noise(1, 2, 1, 0.1 * 1024, 10);
  SystemState s = state_of({1.0, -1.0});
  try {
    integrate(ProcessTag::discrete_ips, stiff, s, 0.1, 1000, noise, nullptr, 0, 1000, nullptr);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 100);
    CHECK(e.step() < 1000);
  }
}

TEST_CASE("simulate: zero steps and determinism") {
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.1, kSqrt2);
  const InitialLaw init{InitialLawKind::gaussian, 1.0};
  const NoisePlan noise(77, 8, 1, 0.0625 * 16, 4);
  const PartitionPlan parts(78, 8, 2, 16);

  const auto empty = simulate(ProcessTag::discrete_ips, sine, init, 0.0625, 0, noise, nullptr, 1);
  REQUIRE(empty.snapshots.size() == 1);
  CHECK(empty.snapshots.begin()->first == 0);

  const auto a = simulate(ProcessTag::discrete_rbips, sine, init, 0.0625, 16, noise, &parts, 1);
  const auto b = simulate(ProcessTag::discrete_rbips, sine, init, 0.0625, 16, noise, &parts, 1);
  CHECK(a.snapshots.size() == 17);
  CHECK(same_snapshots(a, b));
  CHECK(a.fingerprint.partition_seed.has_value());
}

TEST_CASE("simulate: snapshot stride and coarsening") {
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.1, kSqrt2);
  const InitialLaw init{InitialLawKind::gaussian, 1.0};
  const NoisePlan noise(5, 4, 1, 1.0, 4);
  const auto rec = simulate(ProcessTag::discrete_ips, sine, init, 0.0625, 16, noise, nullptr, 4);
  std::vector<std::size_t> keys;
  for (const auto& [k, s] : rec.snapshots) keys.push_back(k);
  CHECK(keys == std::vector<std::size_t>{0, 4, 8, 12, 16});

  const auto every = simulate(ProcessTag::discrete_ips, sine, init, 0.0625, 16, noise, nullptr, 1);
  const auto coarse = every.coarsened(4);
  CHECK(coarse.tau == 0.25);
  REQUIRE(coarse.snapshots.size() == 5);
  CHECK(coarse.snapshots.at(2).positions == every.snapshots.at(8).positions);
}

TEST_CASE("simulate: partition plan required exactly for batched processes") {
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.1, kSqrt2);
  const InitialLaw init;
  const NoisePlan noise(5, 4, 1, 1.0, 4);
  const PartitionPlan parts(6, 4, 2, 16);
  CHECK_THROWS_AS(simulate(ProcessTag::discrete_rbips, sine, init, 0.0625, 16, noise, nullptr, 1), ConfigError);
  CHECK_THROWS_AS(simulate(ProcessTag::discrete_ips, sine, init, 0.0625, 16, noise, &parts, 1), ConfigError);
}

TEST_CASE("references: refine 0 equals the discrete schemes bitwise") {
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.3, kSqrt2);
  const InitialLaw init{InitialLawKind::uniform_box, 2.0};
  const NoisePlan noise(21, 8, 1, 0.125 * 32, 8);
  const PartitionPlan parts(22, 8, 2, 32);
  const auto d_ips = simulate(ProcessTag::discrete_ips, sine, init, 0.125, 32, noise, nullptr, 1);
  const auto r_ips = reference_ips(sine, init, 0.125, 32, noise, 0);
  CHECK(same_snapshots(d_ips, r_ips));
  const auto d_rb = simulate(ProcessTag::discrete_rbips, sine, init, 0.125, 32, noise, &parts, 1);
  const auto r_rb = reference_rbips(sine, init, 0.125, 32, noise, parts, 0);
  CHECK(same_snapshots(d_rb, r_rb));
}

TEST_CASE("references: p = N and K = 0 degenerate to the IPS reference") {
  const InitialLaw init{InitialLawKind::gaussian, 1.0};
  const NoisePlan noise(31, 8, 1, 0.0625 * 16, 7);
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.5, kSqrt2);
  const PartitionPlan whole(32, 8, 8, 16);
  CHECK(max_gap(reference_rbips(sine, init, 0.0625, 16, noise, whole, 3), reference_ips(sine, init, 0.0625, 16, noise, 3)) <
        1e-12);
  const ForceModel free = ForceModel::builtin(1, 1.0, 0.0, kSqrt2);
  const PartitionPlan pairs(33, 8, 2, 16);
  CHECK(same_snapshots(reference_rbips(free, init, 0.0625, 16, noise, pairs, 3),
                       reference_ips(free, init, 0.0625, 16, noise, 3)));
}

TEST_CASE("references: refinement converges to the exact flow") {
  // x' = -x from x0 = 1 over one unit step, as 2^12 noise-free substeps.
  const ForceModel ou = ForceModel::builtin(1, 1.0, 0.0, kSqrt2);
  const std::vector<double> zero(2, 0.0);
  SystemState s = state_of({1.0, 2.0});
  for (int k = 0; k < 4096; ++k) s = step_em_full(s, ou, 1.0 / 4096.0, zero);
  CHECK(s.positions[0] == Approx(std::exp(-1.0)).epsilon(2e-4));
  CHECK(s.positions[0] == Approx(std::pow(1.0 - 1.0 / 4096.0, 4096)).epsilon(1e-12));
}

TEST_CASE("references: substeps follow the finer noise grid") {
  // One macro step with refine 2 equals four discrete steps at tau/4 on the same path.
  const ForceModel sine = ForceModel::builtin(1, 1.0, 0.3, kSqrt2);
  const NoisePlan noise(8, 4, 1, 1.0, 4);
  const InitialLaw init{InitialLawKind::gaussian, 1.0};
  const auto coarse = reference_ips(sine, init, 0.25, 4, noise, 2);
  const auto fine = simulate(ProcessTag::discrete_ips, sine, init, 0.0625, 16, noise, nullptr, 4);
  for (std::size_t k = 0; k <= 4; ++k) {
    CHECK(coarse.snapshots.at(k).positions == fine.snapshots.at(4 * k).positions);
  }
}

TEST_CASE("mean-field oracle: OU terminal variance") {
  const ForceModel ou = ForceModel::builtin(1, 1.0, 0.0, kSqrt2);
  const InitialLaw init;
  const auto rec = mean_field_oracle(ou, init, 10000, 0.001953125, 10240, 2024, 10240);
  const auto& last = rec.snapshots.rbegin()->second;
  CHECK(last.time == Approx(20.0));
  double m = 0.0, v = 0.0;
  for (double x : last.positions) m += x;
  m /= 10000.0;
  for (double x : last.positions) v += (x - m) * (x - m);
  v /= 9999.0;
  CHECK(std::abs(v - 1.0) < 0.02);
  CHECK_THROWS(mean_field_oracle(ou, init, 1, 0.01, 1, 1, 1));
}

TEST_CASE("initial laws") {
  CHECK(parse_initial_law("gaussian", 2.0).kind == InitialLawKind::gaussian);
  CHECK_THROWS_AS(parse_initial_law("cauchy", 1.0), ConfigError);
  CHECK_THROWS_AS(parse_initial_law("uniform", 0.0), ConfigError);
  const InitialLaw g{InitialLawKind::gaussian, 2.0};
  CHECK(g.moment(2, 3) == Approx(12.0));
  CHECK(g.moment(4, 1) == Approx(48.0));
  const InitialLaw u{InitialLawKind::uniform_box, 1.0};
  CHECK(u.moment(2, 1) == Approx(1.0 / 3.0));
  CHECK(u.moment(4, 1) == Approx(1.0 / 5.0));
  const auto xs = u.sample(9, 1000, 2);
  CHECK(xs.size() == 2000);
  for (double x : xs) CHECK(std::abs(x) <= 1.0);
  const InitialLaw dirac;
  for (double x : dirac.sample(9, 10, 1)) CHECK(x == 0.0);
}

TEST_CASE("snapshot CSV layout") {
  const ForceModel ou = ForceModel::builtin(2, 1.0, 0.0, kSqrt2);
  const NoisePlan noise(3, 2, 2, 0.5, 1);
  const auto rec = simulate(ProcessTag::discrete_ips, ou, InitialLaw{}, 0.25, 2, noise, nullptr, 2);
  std::ostringstream os;
  const std::vector<TrajectoryRecord> recs{rec};
  write_snapshots_csv(os, recs, rec.fingerprint.to_string());
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ", 0) == 0);
  CHECK(line.find("noise_seed=3") != std::string::npos);
  std::getline(in, line);
  CHECK(line == "replica,process_tag,step,particle,coord,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 2 * 2);  // snapshots {0, 2} x 2 particles x 2 coords
}
