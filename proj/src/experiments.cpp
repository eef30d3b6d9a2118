#include "rbm/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "rbm/errors.hpp"
#include "rbm/parallel.hpp"
#include "rbm/rng.hpp"

namespace rbm {

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;
constexpr std::uint64_t kPartitionTag = 0x7061727469ULL;
constexpr std::uint64_t kOracleTag = 0x6f7261636c65ULL;
constexpr std::uint64_t kPerfTag = 0x70657266ULL;
constexpr double kOracleSnapshotDt = 0.5;

void note(const RunOptions& opts, const std::string& msg) {
  if (opts.log != nullptr) *opts.log << msg << std::endl;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

/// horizon / tau as an exact integer step count.
std::size_t exact_steps(double horizon, double tau, const std::string& what) {
  if (!(tau > 0.0) || !(horizon > 0.0)) throw ConfigError(what + ": tau and horizon must be positive");
  const double ratio = horizon / tau;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw ConfigError(what + ": " + fmt(horizon) + " is not a whole number of steps of " + fmt(tau));
  }
  return static_cast<std::size_t>(rounded);
}

std::size_t ceil_log2(std::size_t n) { return n <= 1 ? 0 : std::bit_width(n - 1); }

/// Noise plan whose level `ceil_log2(n_steps)` has step exactly tau.
NoisePlan plan_for_steps(std::uint64_t seed, std::size_t n, std::size_t d, double tau,
                         std::size_t n_steps, std::size_t refine = 0) {
  const std::size_t level = ceil_log2(n_steps);
  return NoisePlan(seed, n, d, std::ldexp(tau, static_cast<int>(level)), level + refine);
}

std::uint64_t tau_tag(double tau) { return std::bit_cast<std::uint64_t>(tau); }

void require_divides(std::size_t p, std::size_t n) {
  if (p < 2 || p > n || n % p != 0) {
    throw ConfigError("batch size p=" + std::to_string(p) + " must be >= 2 and divide N=" +
                      std::to_string(n));
  }
}

std::string json_record(const nlohmann::json& j) { return j.dump(); }

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

struct GaussianOrOracle {
  bool gaussian = true;
  double mean = 0.0;
  double std = 1.0;
  std::vector<double> oracle_sorted;

  double w1(std::vector<double>& samples) const {
    if (gaussian) return w1_vs_gaussian_1d(samples, mean, std);
    std::sort(samples.begin(), samples.end());
    return w1_cdf_1d_sorted(samples, oracle_sorted);
  }
};

/// Pooled late-time positions of the large-N full-interaction system.
std::vector<double> oracle_pool(const ForceModel& model, const InitialLaw& init, std::size_t n_ref,
                                double tau_fine, double lo, double hi, std::uint64_t seed) {
  if (!(hi > lo) || lo < 0.0) throw ConfigError("oracle window must satisfy 0 <= lo < hi");
  const std::size_t n_steps = exact_steps(hi, tau_fine, "oracle horizon");
  const std::size_t stride = exact_steps(kOracleSnapshotDt, tau_fine, "oracle snapshot stride");
  std::vector<double> pool;
  run_mean_field_oracle(model, init, n_ref, tau_fine, n_steps, seed, stride,
                        [&](const SystemState& s) {
                          if (s.time + 1e-12 >= lo) {
                            pool.insert(pool.end(), s.positions.begin(), s.positions.end());
                          }
                        });
  std::sort(pool.begin(), pool.end());
  return pool;
}

GaussianOrOracle resolve_target(const std::string& kind, const ModelParams& params,
                                const ForceModel& model, const InitialLaw& init, std::size_t n_ref,
                                double tau_fine, double lo, double hi, std::uint64_t seed,
                                const RunOptions& opts) {
  GaussianOrOracle target;
  bool gaussian = false;
  if (kind == "auto") {
    gaussian = params.exact_gaussian_target();
  } else if (kind == "gaussian") {
    if (!params.exact_gaussian_target()) {
      throw ConfigError("target 'gaussian' needs d=1, epsilon=0 and tanh_amp=0");
    }
    gaussian = true;
  } else if (kind != "oracle") {
    throw ConfigError("target must be auto, gaussian or oracle (got '" + kind + "')");
  }
  target.gaussian = gaussian;
  if (gaussian) {
    target.std = params.sigma / std::sqrt(2.0 * params.alpha);
  } else {
    note(opts, "computing mean-field oracle with N_ref=" + std::to_string(n_ref));
    target.oracle_sorted = oracle_pool(model, init, n_ref, tau_fine, lo, hi, derive_seed(seed, kOracleTag));
  }
  return target;
}

void require_dim1(const ModelParams& params, const char* study) {
  if (params.dim != 1) throw ConfigError(std::string(study) + " study supports d=1 only");
}

}  // namespace

ForceModel ModelParams::build() const {
  return ForceModel::builtin(dim, alpha, epsilon, sigma, tanh_amp, theta);
}

bool StudyResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

bool StudyResult::diverged() const {
  return std::any_of(failures.begin(), failures.end(), [](const GridFailure& f) { return f.divergence; });
}

std::uint64_t study_seed(std::uint64_t top_seed, std::string_view study) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : study) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(top_seed, h);
}

void validate_tau_grid(const ForceModel& model, std::span<const double> taus, bool allow_unstable) {
  const double t0 = tau0(model.declared());
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("time steps must be positive");
    if (tau >= t0 && !allow_unstable) {
      throw ConfigError("tau=" + fmt(tau) + " is not below tau0=" + fmt(t0) +
                        " (pass --allow-unstable-tau to run it anyway)");
    }
  }
}

// =============================================================================
// strong order

namespace {

enum Pair { dips_vs_rips = 0, drbips_vs_rrbips = 1, rrbips_vs_rips = 2, drbips_vs_rips = 3 };
constexpr const char* kPairNames[] = {"dips_vs_rips", "drbips_vs_rrbips", "rrbips_vs_rips",
                                      "drbips_vs_rips"};

struct StrongCells {
  std::size_t n_tau = 0;
  std::size_t n_p = 0;
  std::vector<StrongErrorAccumulator> cells;
  std::vector<std::string> failure;
  std::vector<char> divergence;

  StrongCells(std::size_t taus, std::size_t ps)
      : n_tau(taus), n_p(ps), cells(taus * (1 + 3 * ps)), failure(cells.size()), divergence(cells.size()) {}

  std::size_t index(Pair pair, std::size_t pi, std::size_t k) const {
    return pair == dips_vs_rips ? k : n_tau + ((pair - 1) * n_p + pi) * n_tau + k;
  }
  void fail(std::size_t idx, const std::string& why, bool div) {
    if (failure[idx].empty()) failure[idx] = why;
    divergence[idx] = divergence[idx] || div;
  }
  void merge(const StrongCells& other) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!other.failure[i].empty()) fail(i, other.failure[i], other.divergence[i]);
      if (failure[i].empty()) cells[i].merge(other.cells[i]);
    }
  }
};

}  // namespace

StudyResult run_strong_order_study(const StrongOrderConfig& cfg, const RunOptions& opts) {
  StudyResult result;
  result.study = "strong-order";
  const ForceModel model = cfg.model.build();
  if (cfg.taus.empty()) throw ConfigError("grid.tau is empty");
  if (cfg.replicas == 0) throw ConfigError("run.replicas must be positive");
  for (std::size_t p : cfg.ps) require_divides(p, cfg.n);
  validate_tau_grid(model, cfg.taus, opts.allow_unstable_tau);

  std::vector<double> taus = cfg.taus;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  std::vector<std::size_t> ps = cfg.ps;
  std::sort(ps.begin(), ps.end());
  ps.erase(std::unique(ps.begin(), ps.end()), ps.end());

  const double tau_min = taus.front();
  std::vector<std::size_t> steps(taus.size());
  std::vector<std::size_t> levels(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    steps[k] = exact_steps(cfg.horizon, taus[k], "strong-order grid");
    if (!std::has_single_bit(steps[k])) {
      throw ConfigError("strong-order needs horizon / tau to be a power of two (tau=" + fmt(taus[k]) + ")");
    }
    levels[k] = static_cast<std::size_t>(std::countr_zero(steps[k]));
  }
  const std::size_t finest = levels.front() + cfg.refine_levels;
  const std::uint64_t seed = study_seed(cfg.seed, result.study);
  note(opts, "strong-order: N=" + std::to_string(cfg.n) + " replicas=" + std::to_string(cfg.replicas) +
                 " reference step " + fmt(std::ldexp(cfg.horizon, -static_cast<int>(finest))));

  auto body = [&](StrongCells& acc, std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    const NoisePlan noise(derive_seed(rs, kNoiseTag), cfg.n, cfg.model.dim, cfg.horizon, finest);
    TrajectoryRecord ref;
    try {
      ref = reference_ips(model, cfg.init, tau_min, steps.front(), noise, cfg.refine_levels, 1);
    } catch (const DivergenceError& e) {
      for (std::size_t i = 0; i < acc.cells.size(); ++i) acc.fail(i, std::string("reference IPS: ") + e.what(), true);
      return;
    }
    for (std::size_t k = 0; k < taus.size(); ++k) {
      const TrajectoryRecord rips = ref.coarsened(steps.front() / steps[k]);
      const std::size_t cell0 = acc.index(dips_vs_rips, 0, k);
      if (acc.failure[cell0].empty()) {
        try {
          const auto dips = simulate(ProcessTag::discrete_ips, model, cfg.init, taus[k], steps[k], noise, nullptr, 1);
          acc.cells[cell0].add(dips, rips);
        } catch (const DivergenceError& e) {
          acc.fail(cell0, e.what(), true);
        }
      }
      for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        const PartitionPlan parts(derive_seed(derive_seed(rs, kPartitionTag), ps[pi] * 64 + levels[k]),
                                  cfg.n, ps[pi], steps[k]);
        const std::size_t c1 = acc.index(drbips_vs_rrbips, pi, k);
        const std::size_t c2 = acc.index(rrbips_vs_rips, pi, k);
        const std::size_t c3 = acc.index(drbips_vs_rips, pi, k);
        try {
          const auto rr = reference_rbips(model, cfg.init, taus[k], steps[k], noise, parts,
                                          finest - levels[k], 1);
          const auto dr = simulate(ProcessTag::discrete_rbips, model, cfg.init, taus[k], steps[k], noise, &parts, 1);
          if (acc.failure[c1].empty()) acc.cells[c1].add(dr, rr);
          if (acc.failure[c2].empty()) acc.cells[c2].add(rr, rips);
          if (acc.failure[c3].empty()) acc.cells[c3].add(dr, rips);
        } catch (const DivergenceError& e) {
          acc.fail(c1, e.what(), true);
          acc.fail(c2, e.what(), true);
          acc.fail(c3, e.what(), true);
        }
      }
    }
  };
  StrongCells total = chunked_reduce<StrongCells>(
      cfg.replicas, 8, opts.threads, [&] { return StrongCells(taus.size(), ps.size()); }, body,
      [](StrongCells& into, const StrongCells& part) { into.merge(part); });

  const std::string base_meta = "model=" + model.describe() + ";init=" + cfg.init.describe() +
                                ";N=" + std::to_string(cfg.n) + ";T=" + fmt(cfg.horizon) +
                                ";replicas=" + std::to_string(cfg.replicas) + ";seed=" +
                                std::to_string(cfg.seed);
  std::map<std::pair<int, std::size_t>, ErrorSeries> by_pair;
  std::map<std::pair<int, std::size_t>, std::map<double, std::pair<double, double>>> at_tau;
  for (int pair = 0; pair < 4; ++pair) {
    const std::size_t n_p = pair == dips_vs_rips ? 1 : ps.size();
    for (std::size_t pi = 0; pi < n_p; ++pi) {
      const std::size_t p = pair == dips_vs_rips ? 0 : ps[pi];
      ErrorSeries s;
      s.kind = SeriesKind::strong_mse;
      s.meta = base_meta + ";pair=" + kPairNames[pair] + ";p=" + std::to_string(p);
      for (std::size_t k = 0; k < taus.size(); ++k) {
        const std::size_t idx = total.index(static_cast<Pair>(pair), pi, k);
        if (!total.failure[idx].empty()) {
          result.failures.push_back({std::string(kPairNames[pair]) + " p=" + std::to_string(p) +
                                         " tau=" + fmt(taus[k]),
                                     total.failure[idx], total.divergence[idx] != 0});
          continue;
        }
        const ErrorSeries over_time = total.cells[idx].series();
        const auto best = std::max_element(over_time.values.begin(), over_time.values.end());
        const std::size_t at = static_cast<std::size_t>(best - over_time.values.begin());
        s.abscissa.push_back(taus[k]);
        s.values.push_back(*best);
        s.stderrs.push_back(over_time.stderrs[at]);
        at_tau[{pair, p}][taus[k]] = {*best, over_time.stderrs[at]};
      }
      const std::string name = std::string("fit:") + kPairNames[pair] + ":p=" + std::to_string(p);
      try {
        const DecayFit fit = fit_order(s);
        result.records.emplace_back(name, fit.to_json());
      } catch (const FitError& e) {
        result.warnings.push_back(name + ": " + e.what());
      }
      by_pair[{pair, p}] = s;
      result.series.push_back(std::move(s));
    }
  }

  {
    Check c;
    c.name = "strong order: slope of drbips_vs_rips (p=" + std::to_string(cfg.order_p) + ") in [" +
             fmt(cfg.slope_lo) + ", " + fmt(cfg.slope_hi) + "] with r^2 >= " + fmt(cfg.min_r_squared);
    auto it = by_pair.find({drbips_vs_rips, cfg.order_p});
    if (it == by_pair.end()) {
      c.detail = "p=" + std::to_string(cfg.order_p) + " is not in grid.p";
    } else {
      try {
        const DecayFit fit = fit_order(it->second);
        c.passed = fit.slope_hat >= cfg.slope_lo && fit.slope_hat <= cfg.slope_hi &&
                   fit.r_squared >= cfg.min_r_squared;
        c.detail = "slope=" + fmt(fit.slope_hat) + " r2=" + fmt(fit.r_squared);
      } catch (const FitError& e) {
        c.detail = std::string("fit error: ") + e.what();
      }
    }
    result.checks.push_back(c);
  }

  if (ps.size() >= 2) {
    Check c;
    c.name = "batch-size dependence: rrbips_vs_rips decreases over p at tau=" + fmt(cfg.p_check_tau);
    const bool in_grid = std::find(taus.begin(), taus.end(), cfg.p_check_tau) != taus.end();
    if (!in_grid) {
      result.warnings.push_back("batch-size comparison skipped: tau=" + fmt(cfg.p_check_tau) + " not in grid.tau");
    } else {
      bool ok = true;
      std::ostringstream detail;
      double prev_v = 0.0;
      double prev_se = 0.0;
      for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        const auto& cell = at_tau[{rrbips_vs_rips, ps[pi]}];
        auto hit = cell.find(cfg.p_check_tau);
        if (hit == cell.end()) {
          ok = false;
          detail << " p=" << ps[pi] << ":missing";
          continue;
        }
        const auto [v, se] = hit->second;
        detail << " p=" << ps[pi] << ":" << fmt(v) << "+-" << fmt(se);
        if (pi > 0 && !(prev_v - v > 2.0 * std::hypot(prev_se, se))) ok = false;
        prev_v = v;
        prev_se = se;
      }
      c.passed = ok;
      c.detail = detail.str().substr(1);
      result.checks.push_back(c);
    }
  }
  return result;
}

// =============================================================================
// long time

StudyResult run_longtime_study(const LongtimeConfig& cfg, const RunOptions& opts) {
  StudyResult result;
  result.study = "longtime";
  require_dim1(cfg.model, "longtime");
  const ForceModel model = cfg.model.build();
  if (cfg.ns.empty() || cfg.taus.empty()) throw ConfigError("grid.n and grid.tau must be nonempty");
  for (std::size_t n : cfg.ns) require_divides(cfg.p, n);
  validate_tau_grid(model, cfg.taus, opts.allow_unstable_tau);
  if (cfg.pooled_samples == 0) throw ConfigError("run.pooled_samples must be positive");

  std::vector<std::size_t> ns = cfg.ns;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  std::vector<double> taus = cfg.taus;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  for (double tau : taus) {
    exact_steps(cfg.horizon, tau, "longtime horizon");
    exact_steps(cfg.snapshot_dt, tau, "longtime snapshot spacing");
  }

  const std::uint64_t seed = study_seed(cfg.seed, result.study);
  const GaussianOrOracle target = resolve_target(cfg.target, cfg.model, model, cfg.init, cfg.n_ref,
                                                 cfg.tau_fine, cfg.ref_window_lo, cfg.ref_window_hi,
                                                 seed, opts);
  if (!target.gaussian && cfg.n_ref < 8 * ns.back()) {
    result.warnings.push_back("N_ref=" + std::to_string(cfg.n_ref) + " is not much larger than max N=" +
                              std::to_string(ns.back()));
  }

  std::map<std::size_t, std::map<double, DecayFit>> fits;
  double min_r2 = std::numeric_limits<double>::infinity();
  std::vector<std::string> fit_errors;

  for (std::size_t n : ns) {
    const std::size_t replicas = (cfg.pooled_samples + n - 1) / n;
    for (double tau : taus) {
      const std::size_t n_steps = exact_steps(cfg.horizon, tau, "longtime horizon");
      const std::size_t stride = exact_steps(cfg.snapshot_dt, tau, "longtime snapshot spacing");
      const std::size_t slots = n_steps / stride + 1;
      const std::size_t width = replicas * n;
      const std::string point = "N=" + std::to_string(n) + " tau=" + fmt(tau);
      note(opts, "longtime: " + point + " replicas=" + std::to_string(replicas));
      const std::uint64_t point_seed = derive_seed(derive_seed(seed, n), tau_tag(tau));
      std::vector<double> pool(slots * width);
      try {
        parallel_for(replicas, opts.threads, [&](std::size_t r) {
          const std::uint64_t rs = derive_seed(point_seed, r);
          const NoisePlan noise = plan_for_steps(derive_seed(rs, kNoiseTag), n, 1, tau, n_steps);
          const PartitionPlan parts(derive_seed(rs, kPartitionTag), n, cfg.p, n_steps);
          SystemState state = initial_state(cfg.init, noise);
          integrate(ProcessTag::discrete_rbips, model, state, tau, n_steps, noise, &parts, 0, stride,
                    [&](const SystemState& s) {
                      const std::size_t slot = s.step_index / stride;
                      std::copy(s.positions.begin(), s.positions.end(), pool.begin() + slot * width + r * n);
                    });
        });
      } catch (const DivergenceError& e) {
        result.failures.push_back({point, e.what(), true});
        continue;
      }
      ErrorSeries s;
      s.kind = SeriesKind::w1;
      s.meta = "model=" + model.describe() + ";init=" + cfg.init.describe() + ";N=" + std::to_string(n) +
               ";tau=" + fmt(tau) + ";p=" + std::to_string(cfg.p) + ";target=" +
               (target.gaussian ? "gaussian" : "oracle(N_ref=" + std::to_string(cfg.n_ref) + ")") +
               ";pooled=" + std::to_string(width) + ";seed=" + std::to_string(cfg.seed);
      std::vector<double> values(slots);
      parallel_for(slots, opts.threads, [&](std::size_t slot) {
        std::vector<double> sample(pool.begin() + slot * width, pool.begin() + (slot + 1) * width);
        values[slot] = target.w1(sample);
      });
      for (std::size_t slot = 0; slot < slots; ++slot) {
        s.abscissa.push_back(static_cast<double>(slot * stride) * tau);
        s.values.push_back(values[slot]);
      }
      const std::string name = "fit:N=" + std::to_string(n) + ":tau=" + fmt(tau);
      try {
        const DecayFit fit = fit_decay(s);
        result.records.emplace_back(name, fit.to_json());
        fits[n][tau] = fit;
        min_r2 = std::min(min_r2, std::isnan(fit.r_squared) ? -1.0 : fit.r_squared);
      } catch (const FitError& e) {
        fit_errors.push_back(point + ": " + e.what());
        result.warnings.push_back(name + ": " + e.what());
      }
      result.series.push_back(std::move(s));
    }
  }

  {
    Check c;
    c.name = "long-time decay fits: r^2 >= " + fmt(cfg.min_r_squared) + " on every transient";
    const bool any = !fits.empty();
    c.passed = any && fit_errors.empty() && result.failures.empty() && min_r2 >= cfg.min_r_squared;
    c.detail = any ? "min r2=" + fmt(min_r2) : "no successful fit";
    if (!fit_errors.empty()) c.detail += "; " + std::to_string(fit_errors.size()) + " fit error(s)";
    result.checks.push_back(c);
  }
  for (const auto& [n, per_tau] : fits) {
    if (per_tau.size() < 3) continue;
    std::vector<double> t;
    std::vector<double> plateau;
    for (const auto& [tau, fit] : per_tau) {
      t.push_back(tau);
      plateau.push_back(fit.plateau_hat);
    }
    Check c;
    c.name = "plateau vs tau slope >= " + fmt(cfg.min_plateau_slope) + " (N=" + std::to_string(n) + ")";
    try {
      const DecayFit f = fit_order(t, plateau);
      result.records.emplace_back("plateau_fit:N=" + std::to_string(n), f.to_json());
      c.passed = f.slope_hat >= cfg.min_plateau_slope;
      c.detail = "slope=" + fmt(f.slope_hat) + " r2=" + fmt(f.r_squared);
    } catch (const FitError& e) {
      c.detail = std::string("fit error: ") + e.what();
    }
    result.checks.push_back(c);
  }
  for (double tau : taus) {
    std::vector<double> lambdas;
    std::ostringstream detail;
    for (const auto& [n, per_tau] : fits) {
      auto it = per_tau.find(tau);
      if (it == per_tau.end()) continue;
      lambdas.push_back(it->second.lambda_hat);
      detail << " N=" << n << ":" << fmt(it->second.lambda_hat);
    }
    if (lambdas.size() < 2) continue;
    const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
    const double mean = std::accumulate(lambdas.begin(), lambdas.end(), 0.0) / static_cast<double>(lambdas.size());
    const double spread = (*hi - *lo) / mean;
    Check c;
    c.name = "lambda relative spread across N <= " + fmt(cfg.max_lambda_spread) + " (tau=" + fmt(tau) + ")";
    c.passed = mean > 0.0 && spread <= cfg.max_lambda_spread;
    c.detail = "spread=" + fmt(spread) + ";" + detail.str();
    nlohmann::json j;
    j["tau"] = tau;
    j["lambda_mean"] = num(mean);
    j["relative_spread"] = num(spread);
    result.records.emplace_back("lambda_spread:tau=" + fmt(tau), json_record(j));
    result.checks.push_back(c);
  }
  return result;
}

// =============================================================================
// propagation of chaos

StudyResult run_chaos_study(const ChaosConfig& cfg, const RunOptions& opts) {
  StudyResult result;
  result.study = "chaos";
  require_dim1(cfg.model, "chaos");
  const ForceModel model = cfg.model.build();
  if (cfg.ns.empty()) throw ConfigError("grid.n is empty");
  if (cfg.replicas == 0) throw ConfigError("run.replicas must be positive");
  for (std::size_t n : cfg.ns) require_divides(cfg.p, n);
  const double tau_arr[] = {cfg.tau};
  validate_tau_grid(model, tau_arr, opts.allow_unstable_tau);
  const std::size_t n_steps = exact_steps(cfg.t_late, cfg.tau, "chaos late time");

  std::vector<std::size_t> ns = cfg.ns;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const std::uint64_t seed = study_seed(cfg.seed, result.study);
  const GaussianOrOracle target = resolve_target(cfg.target, cfg.model, model, cfg.init, cfg.n_ref,
                                                 cfg.tau_fine, cfg.ref_window_lo, cfg.ref_window_hi,
                                                 seed, opts);
  if (!target.gaussian && cfg.n_ref < 8 * ns.back()) {
    result.warnings.push_back("configuration warning: N_ref=" + std::to_string(cfg.n_ref) +
                              " is not much larger than max N=" + std::to_string(ns.back()));
  }

  ErrorSeries s;
  s.kind = SeriesKind::w1;
  s.meta = "model=" + model.describe() + ";init=" + cfg.init.describe() + ";tau=" + fmt(cfg.tau) +
           ";p=" + std::to_string(cfg.p) + ";t=" + fmt(cfg.t_late) + ";replicas=" +
           std::to_string(cfg.replicas) + ";target=" +
           (target.gaussian ? "gaussian" : "oracle(N_ref=" + std::to_string(cfg.n_ref) + ")") +
           ";seed=" + std::to_string(cfg.seed);
  for (std::size_t n : ns) {
    note(opts, "chaos: N=" + std::to_string(n));
    const std::uint64_t point_seed = derive_seed(seed, n);
    std::vector<double> w(cfg.replicas);
    try {
      parallel_for(cfg.replicas, opts.threads, [&](std::size_t r) {
        const std::uint64_t rs = derive_seed(point_seed, r);
        const NoisePlan noise = plan_for_steps(derive_seed(rs, kNoiseTag), n, 1, cfg.tau, n_steps);
        const PartitionPlan parts(derive_seed(rs, kPartitionTag), n, cfg.p, n_steps);
        SystemState state = initial_state(cfg.init, noise);
        integrate(ProcessTag::discrete_rbips, model, state, cfg.tau, n_steps, noise, &parts, 0, n_steps, nullptr);
        w[r] = target.w1(state.positions);
      });
    } catch (const DivergenceError& e) {
      result.failures.push_back({"N=" + std::to_string(n), e.what(), true});
      continue;
    }
    MeanAccumulator acc;
    for (double x : w) acc.add(x);
    s.abscissa.push_back(static_cast<double>(n));
    s.values.push_back(acc.mean());
    s.stderrs.push_back(acc.stderr_of_mean());
  }

  Check c;
  if (target.gaussian) {
    c.name = "propagation of chaos: slope vs N = " + fmt(cfg.exact_slope) + " +- " + fmt(cfg.exact_slope_tol) +
             " (exact Gaussian target)";
  } else {
    c.name = "propagation of chaos: slope vs N <= " + fmt(cfg.max_slope) + " (mean-field oracle target)";
  }
  try {
    const DecayFit fit = fit_order(s);
    result.records.emplace_back("fit:w1_vs_N", fit.to_json());
    c.passed = target.gaussian ? std::abs(fit.slope_hat - cfg.exact_slope) <= cfg.exact_slope_tol
                               : fit.slope_hat <= cfg.max_slope;
    c.detail = "slope=" + fmt(fit.slope_hat) + " r2=" + fmt(fit.r_squared);
  } catch (const FitError& e) {
    c.detail = std::string("fit error: ") + e.what();
  }
  result.checks.push_back(c);
  result.series.push_back(std::move(s));
  return result;
}

// =============================================================================
// moment stability

namespace {

struct StabilityAcc {
  MomentAccumulator moments{4};
  std::size_t diverged_replicas = 0;
  std::size_t first_divergence = std::numeric_limits<std::size_t>::max();

  void merge(const StabilityAcc& other) {
    diverged_replicas += other.diverged_replicas;
    first_divergence = std::min(first_divergence, other.first_divergence);
    if (diverged_replicas == 0) moments.merge(other.moments);
  }
};

}  // namespace

StudyResult run_stability_study(const StabilityConfig& cfg, const RunOptions& opts) {
  StudyResult result;
  result.study = "stability";
  const ForceModel model = cfg.model.build();
  require_divides(cfg.p, cfg.n);
  if (cfg.snapshot_every == 0 || cfg.n_steps == 0 || cfg.replicas == 0) {
    throw ConfigError("run.n_steps, run.snapshot_every and run.replicas must be positive");
  }
  const double t0 = tau0(model.declared());
  std::vector<double> taus = cfg.taus;
  if (taus.empty()) {
    for (double f : cfg.tau_factors) taus.push_back(f * t0);
  }
  if (taus.empty()) throw ConfigError("no time steps given (grid.tau or grid.tau_factors)");
  std::sort(taus.begin(), taus.end());
  validate_tau_grid(model, taus, opts.allow_unstable_tau);
  const bool linear_free = cfg.model.interaction_free() && cfg.model.tanh_amp == 0.0;
  const std::uint64_t seed = study_seed(cfg.seed, result.study);

  bool flags_match = true;
  std::ostringstream flag_detail;
  bool bounded_ok = true;
  bool bounded_any = false;
  std::ostringstream bounded_detail;

  for (double tau : taus) {
    note(opts, "stability: tau=" + fmt(tau) + " (tau0=" + fmt(t0) + ")");
    const std::uint64_t point_seed = derive_seed(seed, tau_tag(tau));
    auto body = [&](StabilityAcc& acc, std::size_t r) {
      if (acc.diverged_replicas > 0) return;
      const std::uint64_t rs = derive_seed(point_seed, r);
      const NoisePlan noise = plan_for_steps(derive_seed(rs, kNoiseTag), cfg.n, cfg.model.dim, tau, cfg.n_steps);
      const PartitionPlan parts(derive_seed(rs, kPartitionTag), cfg.n, cfg.p, cfg.n_steps);
      SystemState state = initial_state(cfg.init, noise);
      try {
        integrate(ProcessTag::discrete_rbips, model, state, tau, cfg.n_steps, noise, &parts, 0,
                  cfg.snapshot_every, [&](const SystemState& s) {
                    acc.moments.add_state(s.step_index / cfg.snapshot_every, s.time, s);
                  });
      } catch (const DivergenceError& e) {
        ++acc.diverged_replicas;
        acc.first_divergence = std::min(acc.first_divergence, e.step());
      }
    };
    const StabilityAcc total = chunked_reduce<StabilityAcc>(
        cfg.replicas, 16, opts.threads, [] { return StabilityAcc{}; }, body,
        [](StabilityAcc& into, const StabilityAcc& part) { into.merge(part); });

    const bool diverged = total.diverged_replicas > 0;
    nlohmann::json j;
    j["tau"] = tau;
    j["tau0"] = t0;
    j["diverged"] = diverged;
    j["divergence_step"] = diverged ? nlohmann::json(total.first_divergence) : nlohmann::json(nullptr);
    if (linear_free) j["amplification"] = std::abs(1.0 - cfg.model.alpha * tau);
    double sup = std::numeric_limits<double>::quiet_NaN();
    double late = std::numeric_limits<double>::quiet_NaN();
    if (!diverged) {
      ErrorSeries s = total.moments.series("model=" + model.describe() + ";init=" + cfg.init.describe() +
                                           ";N=" + std::to_string(cfg.n) + ";p=" + std::to_string(cfg.p) +
                                           ";tau=" + fmt(tau) + ";replicas=" + std::to_string(cfg.replicas) +
                                           ";seed=" + std::to_string(cfg.seed));
      sup = s.sup();
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.values.size(); ++k) {
        if (s.abscissa[k] >= cfg.window_lo - 1e-12 && s.abscissa[k] <= cfg.window_hi + 1e-12) {
          m = std::max(m, s.values[k]);
        }
      }
      if (std::isfinite(m)) late = m;
      result.series.push_back(std::move(s));
    } else {
      result.failures.push_back({"tau=" + fmt(tau), "divergence at step " + std::to_string(total.first_divergence) +
                                                        " in " + std::to_string(total.diverged_replicas) + " replica(s)",
                                 false});
    }
    j["sup"] = num(sup);
    j["late_window_max"] = num(late);
    j["ratio"] = num(sup / late);
    result.records.emplace_back("stability:tau=" + fmt(tau), json_record(j));

    if (tau < t0 && static_cast<double>(cfg.n_steps) * tau >= cfg.window_hi) {
      bounded_any = true;
      const bool ok = !diverged && std::isfinite(late) && sup <= cfg.max_sup_ratio * late;
      bounded_ok = bounded_ok && ok;
      bounded_detail << " tau=" << fmt(tau) << ":sup=" << fmt(sup) << ",late=" << fmt(late);
    }
    if (linear_free) {
      const bool predicted = std::abs(1.0 - cfg.model.alpha * tau) > 1.0;
      flags_match = flags_match && predicted == diverged;
      flag_detail << " tau=" << fmt(tau) << ":predicted=" << predicted << ",observed=" << diverged;
    }
  }
  if (bounded_any) {
    Check c;
    c.name = "moment stability: fourth-moment sup <= " + fmt(cfg.max_sup_ratio) + " x max over t in [" +
             fmt(cfg.window_lo) + ", " + fmt(cfg.window_hi) + "]";
    c.passed = bounded_ok;
    c.detail = bounded_detail.str().substr(1);
    result.checks.push_back(c);
  }
  if (linear_free) {
    Check c;
    c.name = "instability flag matches |1 - alpha tau| > 1";
    c.passed = flags_match;
    c.detail = flag_detail.str().substr(1);
    result.checks.push_back(c);
  }
  return result;
}

// =============================================================================
// complexity

StudyResult run_perf_benchmark(const PerfConfig& cfg, const RunOptions& opts) {
  using clock = std::chrono::steady_clock;
  StudyResult result;
  result.study = "perf";
  const ForceModel model = cfg.model.build();
  if (cfg.ns.empty()) throw ConfigError("grid.n is empty");
  for (std::size_t n : cfg.ns) require_divides(cfg.p, n);
  std::vector<std::size_t> ns = cfg.ns;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const std::uint64_t seed = study_seed(cfg.seed, result.study);
  const std::size_t d = cfg.model.dim;

  ErrorSeries full;
  full.kind = SeriesKind::step_time;
  full.meta = "model=" + model.describe() + ";scheme=full;d=" + std::to_string(d);
  ErrorSeries batched = full;
  batched.meta = "model=" + model.describe() + ";scheme=batched;p=" + std::to_string(cfg.p) + ";d=" +
                 std::to_string(d);

  for (std::size_t n : ns) {
    CounterStream stream(derive_seed(seed, kPerfTag), n);
    std::vector<double> x0(n * d);
    for (double& v : x0) v = stream.normal();
    std::vector<double> dW(n * d);
    for (double& v : dW) v = std::sqrt(cfg.tau) * stream.normal();
    const PartitionPlan parts(derive_seed(seed, n), n, cfg.p, std::numeric_limits<std::size_t>::max() / 2);

    auto measure = [&](auto&& step) {
      SystemState state = SystemState::from_positions(x0, d);
      Stepper stepper(model);
      for (std::size_t w = 0; w < cfg.warmup; ++w) step(stepper, state);
      std::size_t reps = 0;
      const auto start = clock::now();
      double elapsed = 0.0;
      do {
        step(stepper, state);
        ++reps;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
      } while (elapsed < cfg.min_seconds || reps < 3);
      return elapsed / static_cast<double>(reps);
    };
    const double t_full = measure([&](Stepper& st, SystemState& s) { st.full(s, cfg.tau, dW); });
    const double t_batch = measure([&](Stepper& st, SystemState& s) {
      st.batched(s, cfg.tau, dW, parts.division(s.step_index));
    });
    note(opts, "perf: N=" + std::to_string(n) + " full=" + fmt(t_full) + "s batched=" + fmt(t_batch) + "s");
    for (double t : {t_full, t_batch}) {
      if (t < 1e-6) {
        result.warnings.push_back("timer resolution: N=" + std::to_string(n) + " step time " + fmt(t) +
                                  " s is below 1 microsecond");
      }
    }
    full.abscissa.push_back(static_cast<double>(n));
    full.values.push_back(t_full);
    batched.abscissa.push_back(static_cast<double>(n));
    batched.values.push_back(t_batch);
  }

  auto slope_check = [&](const ErrorSeries& s, const std::string& label, double lo, double hi) {
    Check c;
    c.name = "complexity: " + label + " step time slope vs N in [" + fmt(lo) + ", " + fmt(hi) + "]";
    try {
      const DecayFit fit = fit_order(s);
      result.records.emplace_back("fit:" + label, fit.to_json());
      c.passed = fit.slope_hat >= lo && fit.slope_hat <= hi;
      c.detail = "slope=" + fmt(fit.slope_hat) + " r2=" + fmt(fit.r_squared);
    } catch (const FitError& e) {
      c.detail = std::string("fit error: ") + e.what();
    }
    result.checks.push_back(c);
  };
  slope_check(full, "full", cfg.full_slope_lo, cfg.full_slope_hi);
  slope_check(batched, "batched", cfg.batched_slope_lo, cfg.batched_slope_hi);
  {
    Check c;
    const double speedup = full.values.back() / batched.values.back();
    c.name = "complexity: batched step >= " + fmt(cfg.min_speedup) + "x faster than full at N=" +
             std::to_string(ns.back()) + ", p=" + std::to_string(cfg.p);
    c.passed = speedup >= cfg.min_speedup;
    c.detail = "speedup=" + fmt(speedup);
    result.checks.push_back(c);
  }
  result.series.push_back(std::move(full));
  result.series.push_back(std::move(batched));
  return result;
}

// =============================================================================
// plain simulation

ProcessTag parse_process_tag(std::string_view name) {
  for (ProcessTag tag : {ProcessTag::discrete_ips, ProcessTag::discrete_rbips, ProcessTag::reference_ips,
                         ProcessTag::reference_rbips, ProcessTag::mean_field_oracle}) {
    if (to_string(tag) == name) return tag;
  }
  throw ConfigError("unknown process '" + std::string(name) + "'");
}

std::vector<TrajectoryRecord> run_simulate(const SimulateConfig& cfg, const RunOptions& opts) {
  const ForceModel model = cfg.model.build();
  const double tau_arr[] = {cfg.tau};
  validate_tau_grid(model, tau_arr, opts.allow_unstable_tau);
  if (cfg.n_steps == 0 || cfg.replicas == 0 || cfg.snapshot_every == 0) {
    throw ConfigError("run.n_steps, run.replicas and run.snapshot_every must be positive");
  }
  if (cfg.n < 2) throw ConfigError("grid.n must be at least 2");
  if (is_batched(cfg.process)) require_divides(cfg.p, cfg.n);
  const bool reference = cfg.process == ProcessTag::reference_ips || cfg.process == ProcessTag::reference_rbips;
  const std::size_t refine = reference ? cfg.refine_levels : 0;
  const std::uint64_t seed = study_seed(cfg.seed, "simulate");

  std::vector<TrajectoryRecord> out(cfg.replicas);
  parallel_for(cfg.replicas, opts.threads, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, r);
    if (cfg.process == ProcessTag::mean_field_oracle) {
      out[r] = mean_field_oracle(model, cfg.init, cfg.n, cfg.tau, cfg.n_steps, derive_seed(rs, kOracleTag),
                                 cfg.snapshot_every);
      return;
    }
    const NoisePlan noise =
        plan_for_steps(derive_seed(rs, kNoiseTag), cfg.n, cfg.model.dim, cfg.tau, cfg.n_steps, refine);
    std::optional<PartitionPlan> parts;
    if (is_batched(cfg.process)) parts.emplace(derive_seed(rs, kPartitionTag), cfg.n, cfg.p, cfg.n_steps);
    switch (cfg.process) {
      case ProcessTag::reference_ips:
        out[r] = reference_ips(model, cfg.init, cfg.tau, cfg.n_steps, noise, refine, cfg.snapshot_every);
        break;
      case ProcessTag::reference_rbips:
        out[r] = reference_rbips(model, cfg.init, cfg.tau, cfg.n_steps, noise, *parts, refine, cfg.snapshot_every);
        break;
      default:
        out[r] = simulate(cfg.process, model, cfg.init, cfg.tau, cfg.n_steps, noise,
                          parts ? &*parts : nullptr, cfg.snapshot_every);
    }
  });
  return out;
}

// =============================================================================
// config binding

namespace {

const std::vector<KeySpec>& model_keys() {
  static const std::vector<KeySpec> keys{
      {"model.dim", "1", "space dimension d"},
      {"model.alpha", "1.0", "drift rate: b(x) = -alpha x + tanh_amp tanh(x)"},
      {"model.epsilon", "0.1", "interaction strength: K(r) = epsilon sin(r)"},
      {"model.sigma", "1.4142135623730951", "noise amplitude"},
      {"model.tanh_amp", "0.0", "tanh perturbation amplitude (|tanh_amp| < alpha)"},
      {"model.theta", "1.0", "declared dissipation offset"},
  };
  return keys;
}

const std::vector<KeySpec>& init_keys() {
  static const std::vector<KeySpec> keys{
      {"init.law", "\"dirac\"", "initial law: dirac | gaussian | uniform"},
      {"init.scale", "1.0", "gaussian std or uniform half-width"},
  };
  return keys;
}

const std::vector<KeySpec>& target_keys() {
  static const std::vector<KeySpec> keys{
      {"target.kind", "\"auto\"", "invariant-law reference: auto | gaussian | oracle"},
      {"target.n_ref", "16384", "mean-field oracle particle count"},
      {"target.tau_fine", "0.001953125", "mean-field oracle time step"},
      {"target.window_lo", "10.0", "oracle pooling window start"},
      {"target.window_hi", "20.0", "oracle pooling window end (oracle horizon)"},
  };
  return keys;
}

std::vector<KeySpec> concat(std::initializer_list<const std::vector<KeySpec>*> parts) {
  std::vector<KeySpec> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

const std::map<std::string, std::vector<KeySpec>, std::less<>>& key_tables() {
  static const std::map<std::string, std::vector<KeySpec>, std::less<>> tables = [] {
    std::map<std::string, std::vector<KeySpec>, std::less<>> t;
    const std::vector<KeySpec> check_model{
        {"check.grid_radius", "4.0", "radius of the assumption-check grid"},
        {"check.grid_points", "41", "grid points per axis"},
    };
    t["check-model"] = concat({&model_keys(), &check_model});

    const std::vector<KeySpec> simulate{
        {"run.process", "\"discrete_rbips\"",
         "discrete_ips | discrete_rbips | reference_ips | reference_rbips | mean_field_oracle"},
        {"grid.n", "64", "number of particles N (N_ref for mean_field_oracle)"},
        {"grid.p", "2", "batch size p"},
        {"grid.tau", "0.0625", "time step"},
        {"run.n_steps", "16", "number of macro steps"},
        {"run.refine_levels", "3", "dyadic refinement of reference processes"},
        {"run.replicas", "1", "independent replicas"},
        {"run.snapshot_every", "1", "snapshot stride in macro steps"},
    };
    t["simulate"] = concat({&model_keys(), &init_keys(), &simulate});

    const std::vector<KeySpec> strong{
        {"grid.n", "64", "number of particles N"},
        {"grid.tau", "[0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125]",
         "time steps (horizon / tau must be a power of two)"},
        {"grid.p", "[2, 4, 8]", "batch sizes"},
        {"run.horizon", "1.0", "final time T"},
        {"run.replicas", "200", "independent replicas"},
        {"run.refine_levels", "3", "reference refinement below the finest tau"},
        {"check.order_p", "2", "batch size of the order-slope check"},
        {"check.p_tau", "0.015625", "tau of the batch-size comparison"},
        {"check.slope_lo", "0.8", "lower bound of the mean-square order slope"},
        {"check.slope_hi", "1.3", "upper bound of the mean-square order slope"},
        {"check.min_r_squared", "0.98", "minimum r^2 of the order fit"},
    };
    t["strong-order"] = concat({&model_keys(), &init_keys(), &strong});

    const std::vector<KeySpec> longtime{
        {"grid.n", "[64]", "particle counts"},
        {"grid.tau", "[0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]", "time steps"},
        {"grid.p", "2", "batch size"},
        {"run.horizon", "20.0", "final time T"},
        {"run.snapshot_dt", "0.25", "time between snapshots"},
        {"run.pooled_samples", "524288", "particles pooled per snapshot (replicas = this / N)"},
        {"check.min_r_squared", "0.9", "minimum r^2 of each decay fit"},
        {"check.min_plateau_slope", "0.4", "minimum plateau-vs-tau log-log slope"},
        {"check.max_lambda_spread", "0.3", "maximum relative spread of lambda across N"},
    };
    t["longtime"] = concat({&model_keys(), &init_keys(), &target_keys(), &longtime});

    const std::vector<KeySpec> chaos{
        {"grid.n", "[16, 64, 256, 1024]", "particle counts"},
        {"grid.tau", "0.00390625", "time step"},
        {"grid.p", "2", "batch size"},
        {"run.t_late", "10.0", "time at which the empirical measure is compared"},
        {"run.replicas", "200", "independent replicas per N"},
        {"check.exact_slope", "-0.5", "expected slope with an exact Gaussian target"},
        {"check.exact_slope_tol", "0.15", "tolerance around check.exact_slope"},
        {"check.max_slope", "-0.35", "slope ceiling with the mean-field oracle target"},
    };
    t["chaos"] = concat({&model_keys(), &init_keys(), &target_keys(), &chaos});

    const std::vector<KeySpec> stability{
        {"grid.tau", "[]", "absolute time steps (overrides grid.tau_factors when nonempty)"},
        {"grid.tau_factors", "[0.5]", "time steps as multiples of tau0"},
        {"grid.n", "8", "number of particles N"},
        {"grid.p", "2", "batch size"},
        {"run.n_steps", "100000", "steps per replica"},
        {"run.snapshot_every", "4", "snapshot stride in steps"},
        {"run.replicas", "1024", "independent replicas"},
        {"check.window_lo", "10.0", "late window start"},
        {"check.window_hi", "20.0", "late window end"},
        {"check.max_sup_ratio", "1.5", "allowed sup / late-window maximum"},
    };
    t["stability"] = concat({&model_keys(), &init_keys(), &stability});

    const std::vector<KeySpec> perf{
        {"grid.n", "[256, 512, 1024, 2048, 4096]", "particle counts"},
        {"grid.p", "2", "batch size"},
        {"run.tau", "0.01", "time step of the timed steps"},
        {"run.min_seconds", "0.25", "minimum timed wall clock per measurement"},
        {"run.warmup", "3", "untimed warmup steps"},
        {"check.full_slope_lo", "1.7", "lower bound of the full-step slope"},
        {"check.full_slope_hi", "2.3", "upper bound of the full-step slope"},
        {"check.batched_slope_lo", "0.8", "lower bound of the batched-step slope"},
        {"check.batched_slope_hi", "1.3", "upper bound of the batched-step slope"},
        {"check.min_speedup", "10.0", "minimum full/batched time ratio at the largest N"},
    };
    t["perf"] = concat({&model_keys(), &perf});
    return t;
  }();
  return tables;
}

}  // namespace

std::span<const KeySpec> study_keys(std::string_view study) {
  const auto& tables = key_tables();
  auto it = tables.find(study);
  if (it == tables.end()) throw ConfigError("unknown study '" + std::string(study) + "'");
  return it->second;
}

ModelParams model_params_from(const Config& cfg) {
  ModelParams m;
  m.dim = cfg.get_size("model.dim");
  m.alpha = cfg.get_double("model.alpha");
  m.epsilon = cfg.get_double("model.epsilon");
  m.sigma = cfg.get_double("model.sigma");
  m.tanh_amp = cfg.get_double("model.tanh_amp");
  m.theta = cfg.get_double("model.theta");
  m.build();
  return m;
}

InitialLaw initial_law_from(const Config& cfg) {
  return parse_initial_law(cfg.get_string("init.law"), cfg.get_double("init.scale"));
}

StrongOrderConfig strong_order_config_from(const Config& cfg, std::uint64_t seed) {
  StrongOrderConfig c;
  c.model = model_params_from(cfg);
  c.init = initial_law_from(cfg);
  c.n = cfg.get_size("grid.n");
  c.taus = cfg.get_doubles("grid.tau");
  c.ps = cfg.get_sizes("grid.p");
  c.horizon = cfg.get_double("run.horizon");
  c.replicas = cfg.get_size("run.replicas");
  c.refine_levels = cfg.get_size("run.refine_levels");
  c.order_p = cfg.get_size("check.order_p");
  c.p_check_tau = cfg.get_double("check.p_tau");
  c.slope_lo = cfg.get_double("check.slope_lo");
  c.slope_hi = cfg.get_double("check.slope_hi");
  c.min_r_squared = cfg.get_double("check.min_r_squared");
  c.seed = seed;
  return c;
}

namespace {

template <class C>
void bind_target(C& c, const Config& cfg) {
  c.target = cfg.get_string("target.kind");
  c.n_ref = cfg.get_size("target.n_ref");
  c.tau_fine = cfg.get_double("target.tau_fine");
  c.ref_window_lo = cfg.get_double("target.window_lo");
  c.ref_window_hi = cfg.get_double("target.window_hi");
}

}  // namespace

LongtimeConfig longtime_config_from(const Config& cfg, std::uint64_t seed) {
  LongtimeConfig c;
  c.model = model_params_from(cfg);
  c.init = initial_law_from(cfg);
  c.ns = cfg.get_sizes("grid.n");
  c.taus = cfg.get_doubles("grid.tau");
  c.p = cfg.get_size("grid.p");
  c.horizon = cfg.get_double("run.horizon");
  c.snapshot_dt = cfg.get_double("run.snapshot_dt");
  c.pooled_samples = cfg.get_size("run.pooled_samples");
  bind_target(c, cfg);
  c.min_r_squared = cfg.get_double("check.min_r_squared");
  c.min_plateau_slope = cfg.get_double("check.min_plateau_slope");
  c.max_lambda_spread = cfg.get_double("check.max_lambda_spread");
  c.seed = seed;
  return c;
}

ChaosConfig chaos_config_from(const Config& cfg, std::uint64_t seed) {
  ChaosConfig c;
  c.model = model_params_from(cfg);
  c.init = initial_law_from(cfg);
  c.ns = cfg.get_sizes("grid.n");
  c.tau = cfg.get_double("grid.tau");
  c.p = cfg.get_size("grid.p");
  c.t_late = cfg.get_double("run.t_late");
  c.replicas = cfg.get_size("run.replicas");
  bind_target(c, cfg);
  c.exact_slope = cfg.get_double("check.exact_slope");
  c.exact_slope_tol = cfg.get_double("check.exact_slope_tol");
  c.max_slope = cfg.get_double("check.max_slope");
  c.seed = seed;
  return c;
}

StabilityConfig stability_config_from(const Config& cfg, std::uint64_t seed) {
  StabilityConfig c;
  c.model = model_params_from(cfg);
  c.init = initial_law_from(cfg);
  c.taus = cfg.get_doubles("grid.tau");
  c.tau_factors = cfg.get_doubles("grid.tau_factors");
  c.n = cfg.get_size("grid.n");
  c.p = cfg.get_size("grid.p");
  c.n_steps = cfg.get_size("run.n_steps");
  c.snapshot_every = cfg.get_size("run.snapshot_every");
  c.replicas = cfg.get_size("run.replicas");
  c.window_lo = cfg.get_double("check.window_lo");
  c.window_hi = cfg.get_double("check.window_hi");
  c.max_sup_ratio = cfg.get_double("check.max_sup_ratio");
  c.seed = seed;
  return c;
}

SimulateConfig simulate_config_from(const Config& cfg, std::uint64_t seed) {
  SimulateConfig c;
  c.model = model_params_from(cfg);
  c.init = initial_law_from(cfg);
  c.process = parse_process_tag(cfg.get_string("run.process"));
  c.n = cfg.get_size("grid.n");
  c.p = cfg.get_size("grid.p");
  c.tau = cfg.get_double("grid.tau");
  c.n_steps = cfg.get_size("run.n_steps");
  c.refine_levels = cfg.get_size("run.refine_levels");
  c.replicas = cfg.get_size("run.replicas");
  c.snapshot_every = cfg.get_size("run.snapshot_every");
  c.seed = seed;
  return c;
}

PerfConfig perf_config_from(const Config& cfg, std::uint64_t seed) {
  PerfConfig c;
  c.model = model_params_from(cfg);
  c.ns = cfg.get_sizes("grid.n");
  c.p = cfg.get_size("grid.p");
  c.tau = cfg.get_double("run.tau");
  c.min_seconds = cfg.get_double("run.min_seconds");
  c.warmup = cfg.get_size("run.warmup");
  c.full_slope_lo = cfg.get_double("check.full_slope_lo");
  c.full_slope_hi = cfg.get_double("check.full_slope_hi");
  c.batched_slope_lo = cfg.get_double("check.batched_slope_lo");
  c.batched_slope_hi = cfg.get_double("check.batched_slope_hi");
  c.min_speedup = cfg.get_double("check.min_speedup");
  c.seed = seed;
  return c;
}

}  // namespace rbm
