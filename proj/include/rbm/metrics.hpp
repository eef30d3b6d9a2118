#pragma once

// Error functionals over coupled trajectories, empirical Wasserstein
// distances, moment tracking and log-log / exponential fits.

#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbm/sim.hpp"

namespace rbm {

enum class SeriesKind { strong_mse, w1, w2, moment2, moment4, step_time };

std::string_view to_string(SeriesKind kind);

/// Mean and standard error of i.i.d. replica values. Merging is exact in
/// count and sums, so chunked reductions only depend on the chunk layout.
class MeanAccumulator {
 public:
  void add(double x) noexcept {
    ++count_;
    sum_ += x;
    sum_sq_ += x * x;
  }
  void merge(const MeanAccumulator& other) noexcept {
    count_ += other.count_;
    sum_ += other.sum_;
    sum_sq_ += other.sum_sq_;
  }
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept;
  /// Standard error of the mean (0 with fewer than two values).
  double stderr_of_mean() const noexcept;

 private:
  std::size_t count_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

struct ErrorSeries {
  SeriesKind kind = SeriesKind::strong_mse;
  std::vector<double> abscissa;
  std::vector<double> values;
  std::vector<double> stderrs;  // empty or one per value
  std::string meta;

  /// Throws ValidationError unless abscissa is strictly increasing and the
  /// values are finite and nonnegative.
  void validate() const;
  std::vector<double> running_sup() const;
  double sup() const;
};

/// CSV rows kind,abscissa,value,stderr,meta (header optional).
void write_series_csv(std::ostream& os, std::span<const ErrorSeries> series, bool header = true);

struct DecayFit {
  double lambda_hat = std::numeric_limits<double>::quiet_NaN();
  double plateau_hat = std::numeric_limits<double>::quiet_NaN();
  double slope_hat = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  std::size_t window_lo = 0;
  std::size_t window_hi = 0;  // inclusive

  /// Flat JSON object; NaN fields are written as null.
  std::string to_json() const;
};

// --- strong error ----------------------------------------------------------

/// (1/N) sum_i |a^i - b^i|^2 for one pair of states.
double mean_square_gap(const SystemState& a, const SystemState& b);

/// Throws CouplingError unless the two records were driven by the same noise
/// (and the same divisions when both are batched) on the same grid.
void require_coupled(const TrajectoryRecord& a, const TrajectoryRecord& b);

/// Replica-streaming version of strong_error.
class StrongErrorAccumulator {
 public:
  void add(const TrajectoryRecord& a, const TrajectoryRecord& b);
  void merge(const StrongErrorAccumulator& other);
  std::size_t replicas() const noexcept { return replicas_; }
  /// Series over snapshot times t = step * tau.
  ErrorSeries series(std::string meta = {}) const;

 private:
  std::size_t replicas_ = 0;
  double tau_ = 0.0;
  std::vector<std::size_t> steps_;
  std::vector<MeanAccumulator> per_step_;
};

/// Replica-averaged normalized mean-square gap between coupled records
/// (a[r] is paired with b[r]).
ErrorSeries strong_error(std::span<const TrajectoryRecord> a, std::span<const TrajectoryRecord> b);

// --- Wasserstein ---------------------------------------------------------------

/// Exact W1 between two equal-size 1-d empirical measures (sorted matching).
double w1_empirical_1d(std::span<const double> a, std::span<const double> b);

/// Exact W1 between 1-d empirical measures of arbitrary sizes, as the
/// integral of |F_a - F_b|.
double w1_cdf_1d(std::span<const double> a, std::span<const double> b);
/// Same as w1_cdf_1d for inputs already sorted ascending.
double w1_cdf_1d_sorted(std::span<const double> a, std::span<const double> b);

/// Exact empirical W_p (p = 1 or 2) between equal-size point clouds in R^d
/// (row-major n x d) by optimal assignment. n is capped at 2048.
double w_p_assignment(std::span<const double> a, std::span<const double> b, std::size_t d, int p);

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
/// Returns assignment[row] = column.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

/// W1 between the empirical measure of `samples` and Normal(mean, std^2).
double w1_vs_gaussian_1d(std::span<const double> samples, double mean, double std);

// --- moments -------------------------------------------------------------------

/// Replica-streaming max_i E|x^i|^order per snapshot.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int order);

  void add(const TrajectoryRecord& rec);
  /// Adds one replica's state at snapshot `slot`; slots must be added in the
  /// same order by every replica (slot k <-> time `time`).
  void add_state(std::size_t slot, double time, const SystemState& state);
  void merge(const MomentAccumulator& other);
  ErrorSeries series(std::string meta = {}) const;

 private:
  int order_;
  std::size_t n_ = 0;
  std::vector<double> times_;
  std::vector<std::vector<MeanAccumulator>> per_slot_;  // [slot][particle]
};

ErrorSeries moment_tracker(std::span<const TrajectoryRecord> replicas, int order);

// --- fits ------------------------------------------------------------------------

/// Least-squares slope of log(value) on log(abscissa). Needs >= 3 positive points.
DecayFit fit_order(std::span<const double> abscissa, std::span<const double> values);
DecayFit fit_order(const ErrorSeries& series);

enum class PlateauMode { tail_mean, zero, fixed };

struct DecayOptions {
  PlateauMode plateau_mode = PlateauMode::tail_mean;
  double fixed_plateau = 0.0;
  std::size_t min_tail = 5;
};

/// Fits value(t) ~ plateau + A exp(-lambda t): plateau from the tail, then
/// lambda from log(value - plateau) on the leading transient window.
DecayFit fit_decay(const ErrorSeries& series, const DecayOptions& options = {});

}  // namespace rbm
