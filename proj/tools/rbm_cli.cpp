// rbm_cli: command-line front end for the random batch simulation studies.
//
// Exit codes: 0 success, 1 configuration error, 2 failed study assertion or
// fit, 3 divergence in a non-stability study.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rbm/config.hpp"
#include "rbm/errors.hpp"
#include "rbm/experiments.hpp"
#include "rbm/model.hpp"
#include "rbm/parallel.hpp"
#include "rbm/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAssertion = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 20240101;
  std::string out_dir = "rbm_out";
  std::size_t threads = 0;
  bool allow_unstable_tau = false;
};

std::string keys_help(std::string_view study) {
  std::ostringstream os;
  os << "\nConfig keys (--config file sections or --set key=value):\n";
  for (const auto& k : rbm::study_keys(study)) {
    os << "  " << std::left << std::setw(22) << k.key << " = " << std::setw(24) << k.default_value
       << "  " << k.help << '\n';
  }
  return os.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Manifest {
 public:
  Manifest(fs::path path, const std::string& study, const rbm::Config& cfg, const CommonArgs& args)
      : path_(std::move(path)) {
    doc_["subcommand"] = study;
    doc_["config"] = json::parse(cfg.to_json());
    doc_["config_file"] = args.config_path.empty() ? json(nullptr) : json(args.config_path);
    doc_["overrides"] = args.sets;
    doc_["seed"] = args.seed;
    doc_["threads"] = args.threads == 0 ? rbm::default_threads() : args.threads;
    doc_["allow_unstable_tau"] = args.allow_unstable_tau;
    doc_["artifact_version"] = kVersion;
    doc_["started_utc"] = utc_now();
    doc_["status"] = "running";
    doc_["outputs"] = json::array();
    start_ = std::chrono::steady_clock::now();
    write();
  }

  void add_output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }

  void finish(int exit_code, const std::string& status) {
    doc_["status"] = status;
    doc_["exit_code"] = exit_code;
    doc_["finished_utc"] = utc_now();
    doc_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write();
  }

 private:
  void write() const {
    std::ofstream out(path_);
    out << doc_.dump(2) << '\n';
  }

  fs::path path_;
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

void write_study_outputs(const rbm::StudyResult& result, const CommonArgs& args, const fs::path& dir,
                         Manifest& manifest) {
  const fs::path csv = dir / (result.study + ".csv");
  {
    std::ofstream out(csv);
    out << "# study=" << result.study << ";seed=" << args.seed << ";version=" << kVersion << '\n';
    rbm::write_series_csv(out, result.series);
  }
  manifest.add_output(csv);

  json doc;
  doc["study"] = result.study;
  doc["records"] = json::object();
  for (const auto& [name, text] : result.records) doc["records"][name] = json::parse(text);
  doc["checks"] = json::array();
  for (const auto& c : result.checks) {
    doc["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  doc["warnings"] = result.warnings;
  doc["failures"] = json::array();
  for (const auto& f : result.failures) {
    doc["failures"].push_back({{"point", f.point}, {"reason", f.reason}, {"divergence", f.divergence}});
  }
  const fs::path fits = dir / (result.study + "_fits.json");
  std::ofstream(fits) << doc.dump(2) << '\n';
  manifest.add_output(fits);
}

int report(const rbm::StudyResult& result, bool divergence_is_failure) {
  for (const auto& w : result.warnings) std::cout << "WARN " << w << '\n';
  for (const auto& f : result.failures) std::cout << "FAILED-POINT " << f.point << ": " << f.reason << '\n';
  for (const auto& c : result.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  }
  if (divergence_is_failure && result.diverged()) return kExitDivergence;
  return result.all_passed() ? kExitOk : kExitAssertion;
}

int run_check_model(const rbm::Config& cfg, const fs::path& dir, Manifest& manifest) {
  const rbm::ModelParams params = rbm::model_params_from(cfg);
  const rbm::ForceModel model = params.build();
  const auto rep = rbm::check_assumptions(model, cfg.get_double("check.grid_radius"),
                                          static_cast<int>(cfg.get_size("check.grid_points")));
  std::cout << "model " << model.describe() << '\n';
  std::cout << "tau0=" << rep.tau0 << '\n';
  std::cout << std::boolalpha << "l0_ok=" << rep.l0_ok << " l1_ok=" << rep.l1_ok
            << " dissipation_ok=" << rep.dissipation_ok
            << " kappa_asymptotically_positive=" << rep.kappa_asymptotically_positive
            << " all_ok=" << rep.all_ok() << '\n';
  json doc;
  doc["model"] = model.describe();
  doc["tau0"] = rep.tau0;
  doc["l0_ok"] = rep.l0_ok;
  doc["l1_ok"] = rep.l1_ok;
  doc["dissipation_ok"] = rep.dissipation_ok;
  doc["kappa_asymptotically_positive"] = rep.kappa_asymptotically_positive;
  doc["all_ok"] = rep.all_ok();
  doc["kappa_samples"] = json::array();
  for (const auto& s : rep.kappa_samples) doc["kappa_samples"].push_back({{"r", s.r}, {"kappa_lower", s.kappa_lower}});
  const fs::path out = dir / "check_model.json";
  std::ofstream(out) << doc.dump(2) << '\n';
  manifest.add_output(out);
  return rep.all_ok() ? kExitOk : kExitAssertion;
}

int run_simulate_cmd(const rbm::Config& cfg, const CommonArgs& args, const rbm::RunOptions& opts,
                     const fs::path& dir, Manifest& manifest) {
  const rbm::SimulateConfig sc = rbm::simulate_config_from(cfg, args.seed);
  const auto records = rbm::run_simulate(sc, opts);
  const fs::path out = dir / "simulate.csv";
  std::ofstream os(out);
  rbm::write_snapshots_csv(os, records, records.front().fingerprint.to_string() + ";seed=" + std::to_string(args.seed));
  manifest.add_output(out);
  std::cout << "wrote " << records.size() << " replica(s) of " << rbm::to_string(sc.process) << " to "
            << out.string() << '\n';
  return kExitOk;
}

int dispatch(const std::string& study, const CommonArgs& args) {
  rbm::Config cfg(rbm::study_keys(study));
  if (!args.config_path.empty()) cfg.merge_file(args.config_path);
  for (const auto& s : args.sets) cfg.set(s);

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  Manifest manifest(dir / (study + "_manifest.json"), study, cfg, args);

  rbm::RunOptions opts;
  opts.threads = args.threads;
  opts.allow_unstable_tau = args.allow_unstable_tau;
  opts.log = &std::cerr;

  int code = kExitOk;
  try {
    if (study == "check-model") {
      code = run_check_model(cfg, dir, manifest);
    } else if (study == "simulate") {
      code = run_simulate_cmd(cfg, args, opts, dir, manifest);
    } else {
      rbm::StudyResult result;
      if (study == "strong-order") {
        result = rbm::run_strong_order_study(rbm::strong_order_config_from(cfg, args.seed), opts);
      } else if (study == "longtime") {
        result = rbm::run_longtime_study(rbm::longtime_config_from(cfg, args.seed), opts);
      } else if (study == "chaos") {
        result = rbm::run_chaos_study(rbm::chaos_config_from(cfg, args.seed), opts);
      } else if (study == "stability") {
        result = rbm::run_stability_study(rbm::stability_config_from(cfg, args.seed), opts);
      } else if (study == "perf") {
        result = rbm::run_perf_benchmark(rbm::perf_config_from(cfg, args.seed), opts);
      }
      write_study_outputs(result, args, dir, manifest);
      code = report(result, study != "stability");
    }
  } catch (const rbm::ConfigError&) {
    manifest.finish(kExitConfig, "config error");
    throw;
  } catch (const rbm::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    manifest.finish(kExitDivergence, "diverged");
    return kExitDivergence;
  } catch (const rbm::FitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    manifest.finish(kExitAssertion, "fit error");
    return kExitAssertion;
  }
  manifest.finish(code, code == kExitOk ? "ok" : "failed");
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random batch method simulations and convergence studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonArgs args;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"check-model", "Check the model constants and print tau0"},
      {"simulate", "Simulate one process and write its snapshots"},
      {"strong-order", "Coupled strong-error study over tau and p"},
      {"longtime", "Long-time W1 decay and plateau study"},
      {"chaos", "Propagation-of-chaos study over N"},
      {"stability", "Fourth-moment stability and instability study"},
      {"perf", "Full vs batched step timing"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", args.config_path, "TOML config file");
    sub->add_option("--set", args.sets, "Override one key: key=value (repeatable)");
    sub->add_option("--seed", args.seed, "Top-level seed")->capture_default_str();
    sub->add_option("--out-dir", args.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--threads", args.threads, "Worker threads (0: all cores)")->capture_default_str();
    sub->add_flag("--allow-unstable-tau", args.allow_unstable_tau, "Permit tau >= tau0");
    sub->footer(keys_help(name));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string study = app.get_subcommands().front()->get_name();
  try {
    return dispatch(study, args);
  } catch (const rbm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rbm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
