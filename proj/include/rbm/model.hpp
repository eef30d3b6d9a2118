#pragma once

// Force models for overdamped interacting particle systems
//
//   dX^i = ( b(X^i) + gamma^i(X) ) dt + sigma dW^i
//
// where gamma^i averages the pair kernel K(X^i - X^j) over the interaction
// partners of particle i (all others, or the members of its random batch).

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rbm {

class Division;

/// Evaluates a map R^d -> R^d. `out` has the same length as `x`.
using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Regularity and dissipation constants a model claims to satisfy.
///
///   |b(x)| <= L0 (|x| + 1),  |grad b| <= L0
///   max(|K|, |grad K|, |grad^2 K|) <= L1
///   -x . b(x) >= alpha |x|^2 - theta
struct DeclaredConstants {
  double L0 = 1.0;
  double L1 = 0.0;
  double alpha = 1.0;
  double theta = 1.0;
};

enum class DriftKind { linear, linear_tanh, custom };
enum class KernelKind { zero, sine, custom };

/// Drift, interaction kernel, diffusion and declared constants.
///
/// Immutable after construction; evaluation is pure, so one model can be
/// shared by concurrently running replicas.
class ForceModel {
 public:
  /// Builtin family b(x) = -rate*x + tanh_amp*tanh(x), K(r) = coupling*sin(r),
  /// both applied componentwise. coupling = 0 gives K == 0.
  static ForceModel builtin(std::size_t dim, double drift_rate, double coupling, double sigma,
                            double tanh_amp = 0.0, double theta = 1.0);

  /// User-supplied drift and kernel. A null kernel means K == 0.
  static ForceModel custom(std::size_t dim, VectorField drift, VectorField kernel, double sigma,
                           DeclaredConstants declared, std::string name = "custom");

  std::size_t dim() const noexcept { return dim_; }
  double sigma() const noexcept { return sigma_; }
  const DeclaredConstants& declared() const noexcept { return declared_; }
  DriftKind drift_kind() const noexcept { return drift_kind_; }
  KernelKind kernel_kind() const noexcept { return kernel_kind_; }
  bool kernel_is_zero() const noexcept { return kernel_kind_ == KernelKind::zero; }

  /// The builtin sine kernel factorizes as sin(x-y) = sin x cos y - cos x sin y,
  /// so full-interaction sums cost O(N) instead of O(N^2).
  bool kernel_is_separable() const noexcept {
    return kernel_kind_ == KernelKind::sine || kernel_kind_ == KernelKind::zero;
  }

  double drift_rate() const noexcept { return rate_; }
  double coupling() const noexcept { return coupling_; }
  double tanh_amp() const noexcept { return tanh_amp_; }

  /// b(x) written to out (no finiteness check; see eval_drift).
  void drift(std::span<const double> x, std::span<double> out) const;
  /// K(r) written to out.
  void kernel(std::span<const double> r, std::span<double> out) const;

  /// Short human-readable description used in fingerprints.
  std::string describe() const;

 private:
  ForceModel() = default;

  std::size_t dim_ = 1;
  double sigma_ = 1.0;
  DeclaredConstants declared_{};
  DriftKind drift_kind_ = DriftKind::linear;
  KernelKind kernel_kind_ = KernelKind::zero;
  double rate_ = 1.0;
  double coupling_ = 0.0;
  double tanh_amp_ = 0.0;
  VectorField custom_drift_;
  VectorField custom_kernel_;
  std::string name_;
};

/// b(x), throwing ModelError on non-finite output.
std::vector<double> eval_drift(const ForceModel& model, std::span<const double> x);

/// forces[i] = b(x^i) + 1/(N-1) sum_{j != i} K(x^i - x^j). Theta(N^2 d) kernel
/// evaluations, Kahan-compensated, summed in ascending j.
/// `positions` and `out` are row-major N x d.
void pairwise_force_full(const ForceModel& model, std::span<const double> positions,
                         std::span<double> out);
std::vector<double> pairwise_force_full(const ForceModel& model,
                                        std::span<const double> positions);

/// forces[i] = b(x^i) + 1/(p-1) sum_{j in C(i), j != i} K(x^i - x^j).
/// Theta(N p d) kernel evaluations.
void pairwise_force_batched(const ForceModel& model, std::span<const double> positions,
                            const Division& division, std::span<double> out);
std::vector<double> pairwise_force_batched(const ForceModel& model,
                                           std::span<const double> positions,
                                           const Division& division);

/// Same values as pairwise_force_full, in O(N d) work for separable kernels.
/// Falls back to the direct sum otherwise.
void pairwise_force_full_fast(const ForceModel& model, std::span<const double> positions,
                              std::span<double> out);

struct KappaSample {
  double r;
  double kappa_lower;
};

struct AssumptionReport {
  bool l0_ok = false;
  bool l1_ok = false;
  bool dissipation_ok = false;
  std::vector<KappaSample> kappa_samples;
  bool kappa_asymptotically_positive = false;
  double tau0 = 0.0;

  bool all_ok() const noexcept {
    return l0_ok && l1_ok && dissipation_ok && kappa_asymptotically_positive;
  }
};

/// min{alpha / (2 L0^2), 1 / (2 alpha)}: the step size below which the
/// discrete schemes keep uniformly bounded fourth moments.
double tau0(const DeclaredConstants& c);

/// Spot-checks the declared constants on a deterministic grid in the ball of
/// radius `grid_radius`, and probes the dissipation profile
///
///   kappa(r) <= inf_{|x-y|=r} -(2/sigma^2) (x-y).(b(x)-b(y)) / |x-y|^2
///
/// along pairs (s u, 0) and (s u, -s u) for unit directions u.
/// This is a lower-bound probe, not a proof.
AssumptionReport check_assumptions(const ForceModel& model, double grid_radius,
                                   int grid_points);

}  // namespace rbm
