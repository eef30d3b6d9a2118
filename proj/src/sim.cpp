#include "rbm/sim.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ULL;

void check_finite(const SystemState& state) {
  for (std::size_t idx = 0; idx < state.positions.size(); ++idx) {
    if (!std::isfinite(state.positions[idx])) {
      throw DivergenceError(state.step_index,
                            "particle " + std::to_string(idx / state.d) + " left the finite range");
    }
  }
}

void check_step_inputs(const SystemState& state, const ForceModel& model, double tau,
                       std::span<const double> dW) {
  if (state.d != model.dim()) throw InvalidSystemError("state dimension differs from model dimension");
  if (dW.size() != state.positions.size()) throw InvalidSystemError("dW must have shape N x d");
  if (!(tau >= 0.0)) throw ConfigError("time step must be nonnegative");
}

}  // namespace

std::string_view to_string(ProcessTag tag) {
  switch (tag) {
    case ProcessTag::discrete_ips: return "discrete_ips";
    case ProcessTag::discrete_rbips: return "discrete_rbips";
    case ProcessTag::reference_ips: return "reference_ips";
    case ProcessTag::reference_rbips: return "reference_rbips";
    case ProcessTag::mean_field_oracle: return "mean_field_oracle";
  }
  return "unknown";
}

bool is_batched(ProcessTag tag) {
  return tag == ProcessTag::discrete_rbips || tag == ProcessTag::reference_rbips;
}

SystemState SystemState::from_positions(std::vector<double> positions, std::size_t d) {
  if (d == 0 || positions.size() % d != 0) throw InvalidSystemError("positions are not N x d");
  SystemState s;
  s.d = d;
  s.n = positions.size() / d;
  s.positions = std::move(positions);
  return s;
}

// ---------------------------------------------------------------------------

std::vector<double> InitialLaw::sample(std::uint64_t seed, std::size_t n, std::size_t d) const {
  std::vector<double> x(n * d, 0.0);
  if (kind == InitialLawKind::dirac_origin) return x;
  CounterStream stream(derive_seed(seed, kInitTag), 0);
  for (double& v : x) {
    v = kind == InitialLawKind::gaussian ? scale * stream.normal()
                                         : scale * (2.0 * stream.uniform() - 1.0);
  }
  return x;
}

double InitialLaw::moment(int order, std::size_t d) const {
  const double dd = static_cast<double>(d);
  if (order != 2 && order != 4) throw ConfigError("moments of order 2 or 4 only");
  switch (kind) {
    case InitialLawKind::dirac_origin:
      return 0.0;
    case InitialLawKind::gaussian: {
      const double s2 = scale * scale;
      return order == 2 ? dd * s2 : dd * (dd + 2.0) * s2 * s2;
    }
    case InitialLawKind::uniform_box: {
      const double a2 = scale * scale;
      return order == 2 ? dd * a2 / 3.0 : dd * a2 * a2 / 5.0 + dd * (dd - 1.0) * a2 * a2 / 9.0;
    }
  }
  return 0.0;
}

std::string InitialLaw::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case InitialLawKind::dirac_origin: return "dirac";
    case InitialLawKind::gaussian: os << "gaussian(" << scale << ")"; break;
    case InitialLawKind::uniform_box: os << "uniform(" << scale << ")"; break;
  }
  return os.str();
}

InitialLaw parse_initial_law(std::string_view name, double scale) {
  InitialLaw law;
  law.scale = scale;
  if (name == "dirac") {
    law.kind = InitialLawKind::dirac_origin;
  } else if (name == "gaussian") {
    law.kind = InitialLawKind::gaussian;
  } else if (name == "uniform") {
    law.kind = InitialLawKind::uniform_box;
  } else {
    throw ConfigError("unknown initial law '" + std::string(name) + "' (dirac, gaussian, uniform)");
  }
  if (law.kind != InitialLawKind::dirac_origin && !(scale > 0.0)) {
    throw ConfigError("initial law scale must be positive");
  }
  return law;
}

std::string Fingerprint::to_string() const {
  std::ostringstream os;
  os << "model=" << model << ";init=" << init << ";N=" << n << ";p=" << batch_size
     << ";noise_seed=" << noise_seed;
  if (partition_seed) os << ";partition_seed=" << *partition_seed;
  return os.str();
}

TrajectoryRecord TrajectoryRecord::coarsened(std::size_t factor) const {
  if (factor == 0) throw ConfigError("coarsening factor must be positive");
  TrajectoryRecord out;
  out.tag = tag;
  out.tau = tau * static_cast<double>(factor);
  out.n = n;
  out.d = d;
  out.fingerprint = fingerprint;
  for (const auto& [step, state] : snapshots) {
    if (step % factor != 0) continue;
    SystemState s = state;
    s.step_index = step / factor;
    out.snapshots.emplace(s.step_index, std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

void Stepper::apply(SystemState& state, double tau, std::span<const double> dW) {
  const double sigma = model_->sigma();
  for (std::size_t k = 0; k < state.positions.size(); ++k) {
    state.positions[k] += forces_[k] * tau + sigma * dW[k];
  }
  ++state.step_index;
  check_finite(state);
}

void Stepper::full(SystemState& state, double tau, std::span<const double> dW) {
  check_step_inputs(state, *model_, tau, dW);
  forces_.resize(state.positions.size());
  pairwise_force_full(*model_, state.positions, forces_);
  apply(state, tau, dW);
}

void Stepper::batched(SystemState& state, double tau, std::span<const double> dW,
                      const Division& division) {
  check_step_inputs(state, *model_, tau, dW);
  forces_.resize(state.positions.size());
  pairwise_force_batched(*model_, state.positions, division, forces_);
  apply(state, tau, dW);
}

void Stepper::full_fast(SystemState& state, double tau, std::span<const double> dW) {
  check_step_inputs(state, *model_, tau, dW);
  forces_.resize(state.positions.size());
  pairwise_force_full_fast(*model_, state.positions, forces_);
  apply(state, tau, dW);
}

SystemState step_em_full(const SystemState& state, const ForceModel& model, double tau,
                         std::span<const double> dW) {
  SystemState next = state;
  Stepper stepper(model);
  stepper.full(next, tau, dW);
  next.time = static_cast<double>(next.step_index) * tau;
  return next;
}

SystemState step_em_batched(const SystemState& state, const ForceModel& model, double tau,
                            std::span<const double> dW, const Division& division) {
  SystemState next = state;
  Stepper stepper(model);
  stepper.batched(next, tau, dW, division);
  next.time = static_cast<double>(next.step_index) * tau;
  return next;
}

// ---------------------------------------------------------------------------

SystemState initial_state(const InitialLaw& init, const NoisePlan& noise) {
  SystemState s = SystemState::from_positions(
      init.sample(noise.seed(), noise.n_particles(), noise.dim()), noise.dim());
  return s;
}

void integrate(ProcessTag tag, const ForceModel& model, SystemState& state, double tau,
               std::size_t n_steps, const NoisePlan& noise, const PartitionPlan* partitions,
               std::size_t refine_levels, std::size_t snapshot_every,
               const SnapshotObserver& observe) {
  if (snapshot_every == 0) throw ConfigError("snapshot stride must be positive");
  if (state.n != noise.n_particles() || state.d != noise.dim()) {
    throw ConfigError("state shape does not match the noise plan");
  }
  if (is_batched(tag) != (partitions != nullptr)) {
    throw ConfigError("a partition plan is required exactly for batched processes");
  }
  if (partitions != nullptr) {
    if (partitions->n_particles() != state.n) throw ConfigError("partition plan size differs from N");
    if (partitions->n_steps() < state.step_index + n_steps) {
      throw ConfigError("partition plan has fewer steps than the run");
    }
  }
  const std::size_t macro_level = noise.level_for(tau);
  const std::size_t level = macro_level + refine_levels;
  if (level > noise.levels()) {
    throw ConfigError("refinement exceeds the noise plan depth (" + std::to_string(level) + " > " +
                      std::to_string(noise.levels()) + ")");
  }
  const std::size_t first = state.step_index;
  if (first + n_steps > noise.steps(macro_level)) {
    throw ConfigError("noise horizon does not cover n_steps * tau");
  }

  const std::size_t substeps = std::size_t{1} << refine_levels;
  const double fine_tau = std::ldexp(tau, -static_cast<int>(refine_levels));
  NoiseCursor cursor(noise, level, first * substeps);
  Stepper stepper(model);

  state.time = static_cast<double>(state.step_index) * tau;
  if (observe) observe(state);
  for (std::size_t n = first; n < first + n_steps; ++n) {
    std::optional<Division> division;
    if (partitions != nullptr) division = partitions->division(n);
    for (std::size_t s = 0; s < substeps; ++s) {
      const auto dW = cursor.next();
      if (division) {
        stepper.batched(state, fine_tau, dW, *division);
      } else if (tag == ProcessTag::mean_field_oracle) {
        stepper.full_fast(state, fine_tau, dW);
      } else {
        stepper.full(state, fine_tau, dW);
      }
      state.step_index -= 1;  // substeps do not advance the macro index
    }
    state.step_index = n + 1;
    state.time = static_cast<double>(state.step_index) * tau;
    if (observe && state.step_index % snapshot_every == 0) observe(state);
  }
}

namespace {

TrajectoryRecord run_record(ProcessTag tag, const ForceModel& model, const InitialLaw& init,
                            double tau, std::size_t n_steps, const NoisePlan& noise,
                            const PartitionPlan* partitions, std::size_t refine_levels,
                            std::size_t snapshot_every) {
  TrajectoryRecord rec;
  rec.tag = tag;
  rec.tau = tau;
  rec.n = noise.n_particles();
  rec.d = noise.dim();
  rec.fingerprint.model = model.describe();
  rec.fingerprint.init = init.describe();
  rec.fingerprint.noise_seed = noise.seed();
  rec.fingerprint.n = rec.n;
  if (partitions != nullptr) {
    rec.fingerprint.partition_seed = partitions->seed();
    rec.fingerprint.batch_size = partitions->batch_size();
  }
  SystemState state = initial_state(init, noise);
  integrate(tag, model, state, tau, n_steps, noise, partitions, refine_levels, snapshot_every,
            [&rec](const SystemState& s) { rec.snapshots.emplace(s.step_index, s); });
  return rec;
}

}  // namespace

TrajectoryRecord simulate(ProcessTag tag, const ForceModel& model, const InitialLaw& init,
                          double tau, std::size_t n_steps, const NoisePlan& noise,
                          const PartitionPlan* partitions, std::size_t snapshot_every) {
  if (tag == ProcessTag::mean_field_oracle) {
    throw ConfigError("use mean_field_oracle for the mean-field reference");
  }
  return run_record(tag, model, init, tau, n_steps, noise, partitions, 0, snapshot_every);
}

TrajectoryRecord reference_ips(const ForceModel& model, const InitialLaw& init, double tau,
                               std::size_t n_steps, const NoisePlan& noise,
                               std::size_t refine_levels, std::size_t snapshot_every) {
  return run_record(ProcessTag::reference_ips, model, init, tau, n_steps, noise, nullptr,
                    refine_levels, snapshot_every);
}

TrajectoryRecord reference_rbips(const ForceModel& model, const InitialLaw& init, double tau,
                                 std::size_t n_steps, const NoisePlan& noise,
                                 const PartitionPlan& partitions, std::size_t refine_levels,
                                 std::size_t snapshot_every) {
  return run_record(ProcessTag::reference_rbips, model, init, tau, n_steps, noise, &partitions,
                    refine_levels, snapshot_every);
}

namespace {

NoisePlan oracle_noise(std::size_t n_ref, std::size_t d, double tau_fine, std::size_t n_steps,
                       std::uint64_t seed) {
  if (!(tau_fine > 0.0)) throw ConfigError("oracle time step must be positive");
  const std::size_t levels = n_steps <= 1 ? 0 : std::bit_width(n_steps - 1);
  return NoisePlan(seed, n_ref, d, std::ldexp(tau_fine, static_cast<int>(levels)), levels);
}

}  // namespace

void run_mean_field_oracle(const ForceModel& model, const InitialLaw& init, std::size_t n_ref,
                           double tau_fine, std::size_t n_steps, std::uint64_t seed,
                           std::size_t snapshot_every, const SnapshotObserver& observe) {
  if (n_ref < 2) throw InvalidSystemError("mean-field oracle needs N_ref >= 2");
  const NoisePlan noise = oracle_noise(n_ref, model.dim(), tau_fine, n_steps, seed);
  SystemState state = initial_state(init, noise);
  integrate(ProcessTag::mean_field_oracle, model, state, tau_fine, n_steps, noise, nullptr, 0,
            snapshot_every, observe);
}

TrajectoryRecord mean_field_oracle(const ForceModel& model, const InitialLaw& init,
                                   std::size_t n_ref, double tau_fine, std::size_t n_steps,
                                   std::uint64_t seed, std::size_t snapshot_every) {
  TrajectoryRecord rec;
  rec.tag = ProcessTag::mean_field_oracle;
  rec.tau = tau_fine;
  rec.n = n_ref;
  rec.d = model.dim();
  rec.fingerprint.model = model.describe();
  rec.fingerprint.init = init.describe();
  rec.fingerprint.noise_seed = seed;
  rec.fingerprint.n = n_ref;
  run_mean_field_oracle(model, init, n_ref, tau_fine, n_steps, seed, snapshot_every,
                        [&rec](const SystemState& s) { rec.snapshots.emplace(s.step_index, s); });
  return rec;
}

void write_snapshots_csv(std::ostream& os, std::span<const TrajectoryRecord> replicas,
                         std::string_view fingerprint) {
  os << "# " << fingerprint << '\n';
  os << "replica,process_tag,step,particle,coord,value\n";
  os << std::setprecision(17);
  for (std::size_t r = 0; r < replicas.size(); ++r) {
    const auto& rec = replicas[r];
    for (const auto& [step, state] : rec.snapshots) {
      for (std::size_t i = 0; i < state.n; ++i) {
        for (std::size_t k = 0; k < state.d; ++k) {
          os << r << ',' << to_string(rec.tag) << ',' << step << ',' << i << ',' << k << ','
             << state.positions[i * state.d + k] << '\n';
        }
      }
    }
  }
}

}  // namespace rbm
