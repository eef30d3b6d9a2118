#pragma once

// Euler-Maruyama integrators for the interacting particle system and its
// random-batch approximation, plus fine-step references driven by the same
// Brownian path (and, for batched processes, the same divisions).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbm/model.hpp"
#include "rbm/rng.hpp"

namespace rbm {

enum class ProcessTag { discrete_ips, discrete_rbips, reference_ips, reference_rbips, mean_field_oracle };

std::string_view to_string(ProcessTag tag);
bool is_batched(ProcessTag tag);

/// Positions of N particles in R^d after `step_index` macro steps.
struct SystemState {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> positions;  // row-major N x d
  std::size_t step_index = 0;
  double time = 0.0;

  static SystemState from_positions(std::vector<double> positions, std::size_t d);

  std::span<const double> particle(std::size_t i) const {
    return std::span<const double>(positions).subspan(i * d, d);
  }
};

enum class InitialLawKind { dirac_origin, gaussian, uniform_box };

/// Initial law nu for all particles (i.i.d. across particles and coordinates).
struct InitialLaw {
  InitialLawKind kind = InitialLawKind::dirac_origin;
  double scale = 1.0;  // gaussian std, or half-width of the box

  std::vector<double> sample(std::uint64_t seed, std::size_t n, std::size_t d) const;
  /// Per-particle moment E|x|^order for order 2 or 4 (M2, M4).
  double moment(int order, std::size_t d) const;
  std::string describe() const;
};

InitialLaw parse_initial_law(std::string_view name, double scale);

/// What a trajectory was coupled through. Pathwise comparisons require equal
/// noise seeds (and equal partition seeds when both sides are batched).
struct Fingerprint {
  std::string model;
  std::string init;
  std::uint64_t noise_seed = 0;
  std::optional<std::uint64_t> partition_seed;
  std::size_t n = 0;
  std::size_t batch_size = 0;

  std::string to_string() const;
};

struct TrajectoryRecord {
  ProcessTag tag = ProcessTag::discrete_ips;
  double tau = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  Fingerprint fingerprint;
  std::map<std::size_t, SystemState> snapshots;

  /// Keeps every `factor`-th snapshot and relabels it on the grid of step
  /// tau * factor. Used to read a fine reference at coarser macro times.
  TrajectoryRecord coarsened(std::size_t factor) const;
};

/// x^i <- x^i + (b(x^i) + gamma^i_full(x)) tau + sigma dW^i.
SystemState step_em_full(const SystemState& state, const ForceModel& model, double tau,
                         std::span<const double> dW);

/// x^i <- x^i + (b(x^i) + gamma^i_batch(x)) tau + sigma dW^i.
SystemState step_em_batched(const SystemState& state, const ForceModel& model, double tau,
                            std::span<const double> dW, const Division& division);

/// Workspace-holding stepper for hot loops. Same arithmetic as the free functions.
class Stepper {
 public:
  explicit Stepper(const ForceModel& model) : model_(&model) {}

  void full(SystemState& state, double tau, std::span<const double> dW);
  void batched(SystemState& state, double tau, std::span<const double> dW, const Division& division);
  /// Full interaction through the O(N) separable sum (mean-field oracle).
  void full_fast(SystemState& state, double tau, std::span<const double> dW);

 private:
  void apply(SystemState& state, double tau, std::span<const double> dW);

  const ForceModel* model_;
  std::vector<double> forces_;
};

using SnapshotObserver = std::function<void(const SystemState&)>;

/// Advances `state` by n_steps macro steps of size tau. Each macro step is
/// split into 2^refine_levels Euler-Maruyama substeps on the noise grid one
/// level finer per refinement; a batched process keeps the division of macro
/// step n frozen across its substeps. `observe` is called on the initial state
/// and after every macro step whose index is a multiple of snapshot_every.
void integrate(ProcessTag tag, const ForceModel& model, SystemState& state, double tau,
               std::size_t n_steps, const NoisePlan& noise, const PartitionPlan* partitions,
               std::size_t refine_levels, std::size_t snapshot_every,
               const SnapshotObserver& observe);

/// Initial positions shared by every process coupled through `noise`.
SystemState initial_state(const InitialLaw& init, const NoisePlan& noise);

/// Discrete IPS or discrete RB-IPS from the initial law.
TrajectoryRecord simulate(ProcessTag tag, const ForceModel& model, const InitialLaw& init,
                          double tau, std::size_t n_steps, const NoisePlan& noise,
                          const PartitionPlan* partitions, std::size_t snapshot_every);

/// IPS reference: Euler-Maruyama at tau / 2^refine_levels on the same path.
TrajectoryRecord reference_ips(const ForceModel& model, const InitialLaw& init, double tau,
                               std::size_t n_steps, const NoisePlan& noise,
                               std::size_t refine_levels, std::size_t snapshot_every = 1);

/// RB-IPS reference: divisions frozen on each macro interval, fine substeps.
TrajectoryRecord reference_rbips(const ForceModel& model, const InitialLaw& init, double tau,
                                 std::size_t n_steps, const NoisePlan& noise,
                                 const PartitionPlan& partitions, std::size_t refine_levels,
                                 std::size_t snapshot_every = 1);

/// Large-N full-interaction IPS standing in for the McKean-Vlasov law.
TrajectoryRecord mean_field_oracle(const ForceModel& model, const InitialLaw& init,
                                   std::size_t n_ref, double tau_fine, std::size_t n_steps,
                                   std::uint64_t seed, std::size_t snapshot_every);

/// Same run as mean_field_oracle, streamed to an observer.
void run_mean_field_oracle(const ForceModel& model, const InitialLaw& init, std::size_t n_ref,
                           double tau_fine, std::size_t n_steps, std::uint64_t seed,
                           std::size_t snapshot_every, const SnapshotObserver& observe);

/// CSV with columns replica,process_tag,step,particle,coord,value. The
/// fingerprint is written as a leading '#' comment line.
void write_snapshots_csv(std::ostream& os, std::span<const TrajectoryRecord> replicas,
                         std::string_view fingerprint);

}  // namespace rbm
