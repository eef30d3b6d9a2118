#include "rbm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include "json.hpp"

#include "rbm/errors.hpp"

namespace rbm {

std::string_view to_string(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::strong_mse: return "strong_mse";
    case SeriesKind::w1: return "w1";
    case SeriesKind::w2: return "w2";
    case SeriesKind::moment2: return "moment2";
    case SeriesKind::moment4: return "moment4";
    case SeriesKind::step_time: return "step_time";
  }
  return "unknown";
}

double MeanAccumulator::mean() const noexcept {
  return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : sum_ / static_cast<double>(count_);
}

double MeanAccumulator::stderr_of_mean() const noexcept {
  if (count_ < 2) return 0.0;
  const double n = static_cast<double>(count_);
  const double m = sum_ / n;
  const double var = std::max(0.0, (sum_sq_ - n * m * m) / (n - 1.0));
  return std::sqrt(var / n);
}

void ErrorSeries::validate() const {
  if (abscissa.size() != values.size()) throw ValidationError("abscissa and values differ in length");
  if (!stderrs.empty() && stderrs.size() != values.size()) {
    throw ValidationError("stderr column differs in length");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(abscissa[k])) throw ValidationError("non-finite abscissa");
    if (k > 0 && !(abscissa[k] > abscissa[k - 1])) {
      throw ValidationError("abscissa must be strictly increasing");
    }
    if (!std::isfinite(values[k]) || values[k] < 0.0) {
      throw ValidationError("series values must be finite and nonnegative");
    }
  }
}

std::vector<double> ErrorSeries::running_sup() const {
  std::vector<double> out(values.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = m = std::max(m, values[k]);
  return out;
}

double ErrorSeries::sup() const {
  if (values.empty()) throw ValidationError("empty series");
  return *std::max_element(values.begin(), values.end());
}

void write_series_csv(std::ostream& os, std::span<const ErrorSeries> series, bool header) {
  if (header) os << "kind,abscissa,value,stderr,meta\n";
  const auto old = os.precision(17);
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      os << to_string(s.kind) << ',' << s.abscissa[k] << ',' << s.values[k] << ','
         << (s.stderrs.empty() ? 0.0 : s.stderrs[k]) << ',' << s.meta << '\n';
    }
  }
  os.precision(old);
}

std::string DecayFit::to_json() const {
  auto num = [](double x) -> nlohmann::json {
    if (!std::isfinite(x)) return nullptr;
    return x;
  };
  nlohmann::json j;
  j["lambda_hat"] = num(lambda_hat);
  j["plateau_hat"] = num(plateau_hat);
  j["slope_hat"] = num(slope_hat);
  j["r_squared"] = num(r_squared);
  j["window_lo"] = window_lo;
  j["window_hi"] = window_hi;
  return j.dump();
}

// ---------------------------------------------------------------------------

double mean_square_gap(const SystemState& a, const SystemState& b) {
  if (a.n != b.n || a.d != b.d || a.positions.size() != b.positions.size()) {
    throw CouplingError("states differ in shape");
  }
  if (a.n == 0) throw ValidationError("empty state");
  double total = 0.0;
  for (std::size_t k = 0; k < a.positions.size(); ++k) {
    const double g = a.positions[k] - b.positions[k];
    total += g * g;
  }
  return total / static_cast<double>(a.n);
}

void require_coupled(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.n != b.n || a.d != b.d) throw CouplingError("records differ in N or d");
  if (a.tau != b.tau) throw CouplingError("records differ in time step");
  if (a.fingerprint.noise_seed != b.fingerprint.noise_seed) {
    throw CouplingError("records were driven by different noise seeds");
  }
  if (is_batched(a.tag) && is_batched(b.tag) &&
      a.fingerprint.partition_seed != b.fingerprint.partition_seed) {
    throw CouplingError("batched records were driven by different partition seeds");
  }
  if (a.snapshots.size() != b.snapshots.size() ||
      !std::equal(a.snapshots.begin(), a.snapshots.end(), b.snapshots.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw CouplingError("records have different snapshot steps");
  }
}

void StrongErrorAccumulator::add(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  require_coupled(a, b);
  if (replicas_ == 0) {
    tau_ = a.tau;
    for (const auto& [step, _] : a.snapshots) steps_.push_back(step);
    per_step_.assign(steps_.size(), {});
  } else {
    if (a.tau != tau_ || a.snapshots.size() != steps_.size()) {
      throw CouplingError("replica grid differs from earlier replicas");
    }
  }
  std::size_t k = 0;
  auto ib = b.snapshots.begin();
  for (auto ia = a.snapshots.begin(); ia != a.snapshots.end(); ++ia, ++ib, ++k) {
    if (ia->first != steps_[k]) throw CouplingError("replica grid differs from earlier replicas");
    per_step_[k].add(mean_square_gap(ia->second, ib->second));
  }
  ++replicas_;
}

void StrongErrorAccumulator::merge(const StrongErrorAccumulator& other) {
  if (other.replicas_ == 0) return;
  if (replicas_ == 0) {
    *this = other;
    return;
  }
  if (other.steps_ != steps_ || other.tau_ != tau_) throw CouplingError("cannot merge different grids");
  for (std::size_t k = 0; k < per_step_.size(); ++k) per_step_[k].merge(other.per_step_[k]);
  replicas_ += other.replicas_;
}

ErrorSeries StrongErrorAccumulator::series(std::string meta) const {
  ErrorSeries s;
  s.kind = SeriesKind::strong_mse;
  s.meta = std::move(meta);
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    s.abscissa.push_back(static_cast<double>(steps_[k]) * tau_);
    s.values.push_back(per_step_[k].mean());
    s.stderrs.push_back(per_step_[k].stderr_of_mean());
  }
  return s;
}

ErrorSeries strong_error(std::span<const TrajectoryRecord> a, std::span<const TrajectoryRecord> b) {
  if (a.size() != b.size() || a.empty()) throw CouplingError("need equal, nonzero replica counts");
  StrongErrorAccumulator acc;
  for (std::size_t r = 0; r < a.size(); ++r) acc.add(a[r], b[r]);
  return acc.series(a[0].fingerprint.to_string());
}

// ---------------------------------------------------------------------------

double w1_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size()) {
    throw ValidationError("w1_empirical_1d needs equal, nonzero sample counts (resample upstream)");
  }
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) total += std::abs(x[k] - y[k]);
  return total / static_cast<double>(x.size());
}

double w1_cdf_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("w1_cdf_1d needs nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return w1_cdf_1d_sorted(x, y);
}

double w1_cdf_1d_sorted(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ValidationError("w1_cdf_1d needs nonempty samples");
  const double wa = 1.0 / static_cast<double>(x.size());
  const double wb = 1.0 / static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = 0.0;
  double fb = 0.0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double next = (j >= y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    total += std::abs(fa - fb) * (next - prev);
    prev = next;
    while (i < x.size() && x[i] == next) {
      ++i;
      fa = static_cast<double>(i) * wa;
    }
    while (j < y.size() && y[j] == next) {
      ++j;
      fb = static_cast<double>(j) * wb;
    }
  }
  return total;
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw ValidationError("cost matrix must be n x n");
  // Shortest augmenting paths with row/column potentials; 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double w_p_assignment(std::span<const double> a, std::span<const double> b, std::size_t d, int p) {
  constexpr std::size_t kCap = 2048;
  if (p != 1 && p != 2) throw ValidationError("w_p_assignment supports p = 1 or 2");
  if (d == 0 || a.size() % d != 0 || a.size() != b.size() || a.empty()) {
    throw ValidationError("point clouds must be equal-size n x d arrays");
  }
  const std::size_t n = a.size() / d;
  if (n > kCap) {
    throw SizeError("assignment solver is capped at n = 2048 points (got " + std::to_string(n) +
                    "); subsample before calling");
  }
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double g = a[i * d + k] - b[j * d + k];
        sq += g * g;
      }
      cost[i * n + j] = p == 2 ? sq : std::sqrt(sq);
    }
  }
  const auto assignment = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
  const double mean = total / static_cast<double>(n);
  return p == 2 ? std::sqrt(mean) : mean;
}

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Antiderivative of Phi vanishing at -infinity.
double int_phi(double x) { return x * std_normal_cdf(x) + std_normal_pdf(x); }

double std_normal_quantile(double q) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

// Integral of |c - Phi(x)| over [lo, hi] for 0 < c < 1.
double abs_gap_integral(double c, double lo, double hi) {
  auto signed_part = [c](double x0, double x1) {
    return (int_phi(x1) - int_phi(x0)) - c * (x1 - x0);
  };
  const double cross = std_normal_quantile(c);
  if (cross > lo && cross < hi) {
    return std::abs(signed_part(lo, cross)) + std::abs(signed_part(cross, hi));
  }
  return std::abs(signed_part(lo, hi));
}

}  // namespace

double w1_vs_gaussian_1d(std::span<const double> samples, double mean, double std) {
  if (!(std > 0.0) || !std::isfinite(std)) throw ValidationError("target std must be positive");
  if (!std::isfinite(mean)) throw ValidationError("target mean must be finite");
  if (samples.size() < 2) throw ValidationError("need at least two samples");
  std::vector<double> z(samples.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!std::isfinite(samples[k])) throw ValidationError("non-finite sample");
    z[k] = (samples[k] - mean) / std;
  }
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double total = int_phi(z.front()) + int_phi(-z.back());
  for (std::size_t k = 1; k < z.size(); ++k) {
    if (z[k] > z[k - 1]) total += abs_gap_integral(static_cast<double>(k) / n, z[k - 1], z[k]);
  }
  return std * total;
}

// ---------------------------------------------------------------------------

MomentAccumulator::MomentAccumulator(int order) : order_(order) {
  if (order != 2 && order != 4) throw ValidationError("moment order must be 2 or 4");
}

void MomentAccumulator::add_state(std::size_t slot, double time, const SystemState& state) {
  if (n_ == 0) n_ = state.n;
  if (state.n != n_) throw ValidationError("replicas differ in N");
  if (slot > times_.size()) throw ValidationError("snapshot slots must be added in order");
  if (slot == times_.size()) {
    times_.push_back(time);
    per_slot_.emplace_back(n_);
  } else if (times_[slot] != time) {
    throw ValidationError("replicas disagree on snapshot times");
  }
  auto& slot_acc = per_slot_[slot];
  for (std::size_t i = 0; i < state.n; ++i) {
    double sq = 0.0;
    for (double x : state.particle(i)) sq += x * x;
    slot_acc[i].add(order_ == 2 ? sq : sq * sq);
  }
}

void MomentAccumulator::add(const TrajectoryRecord& rec) {
  std::size_t slot = 0;
  for (const auto& [step, state] : rec.snapshots) {
    add_state(slot++, static_cast<double>(step) * rec.tau, state);
  }
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.order_ != order_) throw ValidationError("cannot merge different moment orders");
  if (other.times_.empty()) return;
  if (times_.empty()) {
    *this = other;
    return;
  }
  if (other.times_ != times_ || other.n_ != n_) throw ValidationError("cannot merge different grids");
  for (std::size_t s = 0; s < per_slot_.size(); ++s) {
    for (std::size_t i = 0; i < n_; ++i) per_slot_[s][i].merge(other.per_slot_[s][i]);
  }
}

ErrorSeries MomentAccumulator::series(std::string meta) const {
  ErrorSeries s;
  s.kind = order_ == 2 ? SeriesKind::moment2 : SeriesKind::moment4;
  s.meta = std::move(meta);
  for (std::size_t slot = 0; slot < times_.size(); ++slot) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n_; ++i) {
      if (per_slot_[slot][i].mean() > per_slot_[slot][best].mean()) best = i;
    }
    s.abscissa.push_back(times_[slot]);
    s.values.push_back(per_slot_[slot][best].mean());
    s.stderrs.push_back(per_slot_[slot][best].stderr_of_mean());
  }
  return s;
}

ErrorSeries moment_tracker(std::span<const TrajectoryRecord> replicas, int order) {
  MomentAccumulator acc(order);
  for (const auto& rec : replicas) acc.add(rec);
  return acc.series(replicas.empty() ? std::string{} : replicas[0].fingerprint.to_string());
}

// ---------------------------------------------------------------------------

namespace {

struct LineFit {
  double slope;
  double intercept;
  double r_squared;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw FitError("abscissa values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  // A perfectly flat response is fitted exactly.
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

}  // namespace

DecayFit fit_order(std::span<const double> abscissa, std::span<const double> values) {
  if (abscissa.size() != values.size()) throw FitError("abscissa and values differ in length");
  if (values.size() < 3) {
    throw FitError("order fit needs at least 3 points (got " + std::to_string(values.size()) + ")");
  }
  std::vector<double> lx(values.size());
  std::vector<double> ly(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      throw FitError("order fit needs positive finite values");
    }
    if (!(abscissa[k] > 0.0)) throw FitError("order fit needs positive abscissa");
    lx[k] = std::log(abscissa[k]);
    ly[k] = std::log(values[k]);
  }
  const LineFit line = least_squares(lx, ly);
  DecayFit fit;
  fit.slope_hat = line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = line.r_squared;
  fit.window_lo = 0;
  fit.window_hi = values.size() - 1;
  return fit;
}

DecayFit fit_order(const ErrorSeries& series) { return fit_order(series.abscissa, series.values); }

DecayFit fit_decay(const ErrorSeries& series, const DecayOptions& options) {
  series.validate();
  const std::size_t n = series.values.size();
  const std::size_t tail = std::max(options.min_tail, n / 4);
  if (n < tail + 2) {
    throw FitError("decay fit needs " + std::to_string(tail + 2) + " points (got " +
                   std::to_string(n) + ")");
  }
  MeanAccumulator tail_acc;
  for (std::size_t k = n - tail; k < n; ++k) tail_acc.add(series.values[k]);
  const double tail_sd = tail_acc.stderr_of_mean() * std::sqrt(static_cast<double>(tail));

  DecayFit fit;
  switch (options.plateau_mode) {
    case PlateauMode::tail_mean: fit.plateau_hat = tail_acc.mean(); break;
    case PlateauMode::zero: fit.plateau_hat = 0.0; break;
    case PlateauMode::fixed: fit.plateau_hat = options.fixed_plateau; break;
  }

  const double excess0 = series.values[0] - fit.plateau_hat;
  if (!(excess0 > 0.0)) throw FitError("no transient above the plateau (fit window is empty)");
  const double threshold = std::max(3.0 * tail_sd, 0.05 * excess0);
  std::size_t hi = 0;
  while (hi + 1 < n - tail && series.values[hi + 1] - fit.plateau_hat > threshold) ++hi;
  if (hi < 1) throw FitError("transient window has fewer than 2 points; widen the tail");

  std::vector<double> t(series.abscissa.begin(), series.abscissa.begin() + hi + 1);
  std::vector<double> ly(hi + 1);
  for (std::size_t k = 0; k <= hi; ++k) ly[k] = std::log(series.values[k] - fit.plateau_hat);
  const LineFit line = least_squares(t, ly);
  fit.lambda_hat = -line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = hi + 1 >= 3 ? line.r_squared : std::numeric_limits<double>::quiet_NaN();
  fit.window_lo = 0;
  fit.window_hi = hi;
  return fit;
}

}  // namespace rbm
