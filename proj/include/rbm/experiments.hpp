#pragma once

// Scripted studies: each binds the integrators to the metrics, returns the
// measured series, fits and pass/fail checks, and never shares state with
// another study.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbm/config.hpp"
#include "rbm/metrics.hpp"
#include "rbm/model.hpp"
#include "rbm/sim.hpp"

namespace rbm {

/// Builtin family b(x) = -alpha x + tanh_amp tanh(x), K(r) = epsilon sin(r).
struct ModelParams {
  std::size_t dim = 1;
  double alpha = 1.0;
  double epsilon = 0.1;
  double sigma = 1.4142135623730951;
  double tanh_amp = 0.0;
  double theta = 1.0;

  ForceModel build() const;
  bool interaction_free() const noexcept { return epsilon == 0.0; }
  /// True when the invariant law is exactly Normal(0, sigma^2 / (2 alpha)).
  bool exact_gaussian_target() const noexcept {
    return epsilon == 0.0 && tanh_amp == 0.0 && dim == 1;
  }
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct GridFailure {
  std::string point;
  std::string reason;
  bool divergence = false;
};

struct StudyResult {
  std::string study;
  std::vector<ErrorSeries> series;
  /// Named flat JSON records (fits and summaries).
  std::vector<std::pair<std::string, std::string>> records;
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  std::vector<GridFailure> failures;

  bool all_passed() const;
  bool diverged() const;
};

struct RunOptions {
  std::size_t threads = 0;  // 0: hardware concurrency
  bool allow_unstable_tau = false;
  std::ostream* log = nullptr;
};

/// Seed of a study derived from the top-level seed and the study name.
std::uint64_t study_seed(std::uint64_t top_seed, std::string_view study);

/// Throws ConfigError if some tau >= tau0(model) and the override is off.
void validate_tau_grid(const ForceModel& model, std::span<const double> taus, bool allow_unstable);

// --- strong order -----------------------------------------------------------------

struct StrongOrderConfig {
  ModelParams model;
  InitialLaw init;
  std::size_t n = 64;
  std::vector<double> taus{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
  std::vector<std::size_t> ps{2, 4, 8};
  double horizon = 1.0;
  std::size_t replicas = 200;
  std::size_t refine_levels = 3;
  std::size_t order_p = 2;            // batch size whose slope is checked
  double p_check_tau = 0.015625;      // tau of the batch-size comparison
  double slope_lo = 0.8;
  double slope_hi = 1.3;
  double min_r_squared = 0.98;
  std::uint64_t seed = 1;
};

/// Coupled mean-square errors sup_n (1/N) sum_i E|X^i - Y^i|^2 for the pairs
/// dips_vs_rips, drbips_vs_rrbips, rrbips_vs_rips and drbips_vs_rips, per tau
/// and batch size, with log-log slopes.
StudyResult run_strong_order_study(const StrongOrderConfig& cfg, const RunOptions& opts);

// --- long time ----------------------------------------------------------------------

struct LongtimeConfig {
  ModelParams model;
  InitialLaw init;
  std::vector<std::size_t> ns{64};
  std::vector<double> taus{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
  std::size_t p = 2;
  double horizon = 20.0;
  double snapshot_dt = 0.25;
  std::size_t pooled_samples = 524288;  // replicas = ceil(pooled_samples / N)
  std::string target = "auto";          // auto | gaussian | oracle
  std::size_t n_ref = 16384;
  double tau_fine = 0.001953125;
  double ref_window_lo = 10.0;
  double ref_window_hi = 20.0;
  double min_r_squared = 0.9;
  double min_plateau_slope = 0.4;
  double max_lambda_spread = 0.3;
  std::uint64_t seed = 1;
};

/// W1 between the pooled single-particle law of the discrete RB-IPS and the
/// invariant law, as a function of t, with a decay fit per (N, tau).
StudyResult run_longtime_study(const LongtimeConfig& cfg, const RunOptions& opts);

// --- propagation of chaos ---------------------------------------------------------

struct ChaosConfig {
  ModelParams model;
  InitialLaw init;
  std::vector<std::size_t> ns{16, 64, 256, 1024};
  double tau = 0.00390625;
  std::size_t p = 2;
  double t_late = 10.0;
  std::size_t replicas = 200;
  std::string target = "auto";
  std::size_t n_ref = 16384;
  double tau_fine = 0.001953125;
  double ref_window_lo = 10.0;
  double ref_window_hi = 20.0;
  double exact_slope = -0.5;
  double exact_slope_tol = 0.15;
  double max_slope = -0.35;
  std::uint64_t seed = 1;
};

/// E[W1(empirical measure of the N particles at t_late, invariant law)] vs N.
StudyResult run_chaos_study(const ChaosConfig& cfg, const RunOptions& opts);

// --- moment stability ---------------------------------------------------------------

struct StabilityConfig {
  ModelParams model;
  InitialLaw init;
  std::vector<double> taus;                 // absolute steps; if empty use factors
  std::vector<double> tau_factors{0.5};     // multiples of tau0
  std::size_t n = 8;
  std::size_t p = 2;
  std::size_t n_steps = 100000;
  std::size_t snapshot_every = 4;
  std::size_t replicas = 1024;
  double window_lo = 10.0;
  double window_hi = 20.0;
  double max_sup_ratio = 1.5;
  std::uint64_t seed = 1;
};

/// Fourth-moment supremum per tau and divergence flags.
StudyResult run_stability_study(const StabilityConfig& cfg, const RunOptions& opts);

// --- complexity -------------------------------------------------------------------------

struct PerfConfig {
  ModelParams model;
  std::vector<std::size_t> ns{256, 512, 1024, 2048, 4096};
  std::size_t p = 2;
  double tau = 0.01;
  double min_seconds = 0.25;
  std::size_t warmup = 3;
  double full_slope_lo = 1.7;
  double full_slope_hi = 2.3;
  double batched_slope_lo = 0.8;
  double batched_slope_hi = 1.3;
  double min_speedup = 10.0;
  std::uint64_t seed = 1;
};

/// Single-threaded wall-clock time per full and per batched step vs N.
StudyResult run_perf_benchmark(const PerfConfig& cfg, const RunOptions& opts);

// --- plain simulation -----------------------------------------------------------------

struct SimulateConfig {
  ModelParams model;
  InitialLaw init;
  ProcessTag process = ProcessTag::discrete_rbips;
  std::size_t n = 64;  // N_ref for the mean-field oracle
  std::size_t p = 2;
  double tau = 0.0625;
  std::size_t n_steps = 16;
  std::size_t refine_levels = 3;
  std::size_t replicas = 1;
  std::size_t snapshot_every = 1;
  std::uint64_t seed = 1;
};

ProcessTag parse_process_tag(std::string_view name);

/// Independent replicas of one process, each re-runnable from (seed, replica).
std::vector<TrajectoryRecord> run_simulate(const SimulateConfig& cfg, const RunOptions& opts);

// --- config binding ---------------------------------------------------------------

/// Declared config keys (with defaults) of a CLI subcommand.
std::span<const KeySpec> study_keys(std::string_view study);

ModelParams model_params_from(const Config& cfg);
InitialLaw initial_law_from(const Config& cfg);
StrongOrderConfig strong_order_config_from(const Config& cfg, std::uint64_t seed);
LongtimeConfig longtime_config_from(const Config& cfg, std::uint64_t seed);
ChaosConfig chaos_config_from(const Config& cfg, std::uint64_t seed);
StabilityConfig stability_config_from(const Config& cfg, std::uint64_t seed);
PerfConfig perf_config_from(const Config& cfg, std::uint64_t seed);
SimulateConfig simulate_config_from(const Config& cfg, std::uint64_t seed);

}  // namespace rbm
