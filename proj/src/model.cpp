#include "rbm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "rbm/errors.hpp"
#include "rbm/rng.hpp"

namespace rbm {

ForceModel ForceModel::builtin(std::size_t dim, double drift_rate, double coupling,
                               double sigma, double tanh_amp, double theta) {
  if (dim == 0) throw ConfigError("model dimension must be positive");
  if (!(sigma > 0.0)) throw ConfigError("diffusion coefficient sigma must be positive");
  if (!(drift_rate > std::abs(tanh_amp))) {
    throw ConfigError("builtin drift needs rate > |tanh amplitude| to be dissipative");
  }
  if (!(theta > 0.0)) throw ConfigError("dissipation constant theta must be positive");
  ForceModel m;
  m.dim_ = dim;
  m.sigma_ = sigma;
  m.rate_ = drift_rate;
  m.coupling_ = coupling;
  m.tanh_amp_ = tanh_amp;
  m.drift_kind_ = tanh_amp == 0.0 ? DriftKind::linear : DriftKind::linear_tanh;
  m.kernel_kind_ = coupling == 0.0 ? KernelKind::zero : KernelKind::sine;
  // Componentwise eps*sin has Euclidean norm up to |eps| sqrt(d); its Jacobian
  // and Hessian are bounded by |eps|.
  m.declared_.L0 = drift_rate + std::abs(tanh_amp);
  m.declared_.L1 = std::abs(coupling) * std::sqrt(static_cast<double>(dim));
  m.declared_.alpha = drift_rate - std::abs(tanh_amp);
  m.declared_.theta = theta;
  m.name_ = "builtin";
  return m;
}

ForceModel ForceModel::custom(std::size_t dim, VectorField drift, VectorField kernel,
                              double sigma, DeclaredConstants declared, std::string name) {
  if (dim == 0) throw ConfigError("model dimension must be positive");
  if (!(sigma > 0.0)) throw ConfigError("diffusion coefficient sigma must be positive");
  if (!drift) throw ConfigError("custom model needs a drift");
  ForceModel m;
  m.dim_ = dim;
  m.sigma_ = sigma;
  m.declared_ = declared;
  m.drift_kind_ = DriftKind::custom;
  m.kernel_kind_ = kernel ? KernelKind::custom : KernelKind::zero;
  m.custom_drift_ = std::move(drift);
  m.custom_kernel_ = std::move(kernel);
  m.name_ = std::move(name);
  return m;
}

void ForceModel::drift(std::span<const double> x, std::span<double> out) const {
  switch (drift_kind_) {
    case DriftKind::linear:
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = -rate_ * x[k];
      break;
    case DriftKind::linear_tanh:
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = -rate_ * x[k] + tanh_amp_ * std::tanh(x[k]);
      break;
    case DriftKind::custom:
      custom_drift_(x, out);
      break;
  }
}

void ForceModel::kernel(std::span<const double> r, std::span<double> out) const {
  switch (kernel_kind_) {
    case KernelKind::zero:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case KernelKind::sine:
      for (std::size_t k = 0; k < r.size(); ++k) out[k] = coupling_ * std::sin(r[k]);
      break;
    case KernelKind::custom:
      custom_kernel_(r, out);
      break;
  }
}

std::string ForceModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (name_ == "builtin") {
    os << "builtin(d=" << dim_ << ";rate=" << rate_ << ";eps=" << coupling_ << ";sigma=" << sigma_
       << ";tanh=" << tanh_amp_ << ")";
  } else {
    os << name_ << "(d=" << dim_ << ";sigma=" << sigma_ << ")";
  }
  return os.str();
}

std::vector<double> eval_drift(const ForceModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw ValidationError("drift argument has wrong dimension");
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError("drift argument is not finite");
  }
  std::vector<double> out(x.size());
  model.drift(x, out);
  for (double v : out) {
    if (!std::isfinite(v)) throw ModelError("drift evaluation produced a non-finite value");
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

void check_system(const ForceModel& model, std::span<const double> positions,
                  std::span<double> out) {
  const std::size_t d = model.dim();
  if (positions.size() % d != 0) throw InvalidSystemError("positions are not N x d");
  if (positions.size() / d < 2) throw InvalidSystemError("an interacting system needs N >= 2");
  if (out.size() != positions.size()) throw InvalidSystemError("force buffer has wrong shape");
}

void add_drift(const ForceModel& model, std::span<const double> positions, std::span<double> out) {
  const std::size_t d = model.dim();
  const std::size_t n = positions.size() / d;
  std::vector<double> b(d);
  for (std::size_t i = 0; i < n; ++i) {
    model.drift(positions.subspan(i * d, d), b);
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] += b[k];
  }
}

// Accumulates sum_{j in members, j != i} K(x^i - x^j) for every i in members,
// in the order the members are listed, and writes scale * sum into out.
template <class KernelFn>
void interaction_sums(std::span<const double> positions, std::size_t d,
                      std::span<const std::uint32_t> members, double scale, KernelFn&& kernel,
                      std::span<double> out) {
  if (d == 1) {
    for (std::uint32_t i : members) {
      const double xi = positions[i];
      Kahan acc;
      for (std::uint32_t j : members) {
        if (j == i) continue;
        acc.add(kernel(xi - positions[j]));
      }
      out[i] = scale * acc.sum;
    }
    return;
  }
  std::vector<Kahan> acc(d);
  for (std::uint32_t i : members) {
    std::fill(acc.begin(), acc.end(), Kahan{});
    for (std::uint32_t j : members) {
      if (j == i) continue;
      for (std::size_t k = 0; k < d; ++k) {
        acc[k].add(kernel(positions[i * d + k] - positions[j * d + k]));
      }
    }
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = scale * acc[k].sum;
  }
}

// Vector-valued custom kernels cannot be split by component.
void custom_interaction_sums(const ForceModel& model, std::span<const double> positions,
                             std::span<const std::uint32_t> members, double scale,
                             std::span<double> out) {
  const std::size_t d = model.dim();
  std::vector<double> diff(d), k_val(d);
  std::vector<Kahan> acc(d);
  for (std::uint32_t i : members) {
    std::fill(acc.begin(), acc.end(), Kahan{});
    for (std::uint32_t j : members) {
      if (j == i) continue;
      for (std::size_t k = 0; k < d; ++k) diff[k] = positions[i * d + k] - positions[j * d + k];
      model.kernel(diff, k_val);
      for (std::size_t k = 0; k < d; ++k) acc[k].add(k_val[k]);
    }
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = scale * acc[k].sum;
  }
}

void group_interactions(const ForceModel& model, std::span<const double> positions,
                        std::span<const std::uint32_t> members, double scale,
                        std::span<double> out) {
  switch (model.kernel_kind()) {
    case KernelKind::zero:
      for (std::uint32_t i : members) {
        for (std::size_t k = 0; k < model.dim(); ++k) out[i * model.dim() + k] = 0.0;
      }
      break;
    case KernelKind::sine: {
      const double eps = model.coupling();
      interaction_sums(positions, model.dim(), members, scale,
                       [eps](double r) { return eps * std::sin(r); }, out);
      break;
    }
    case KernelKind::custom:
      custom_interaction_sums(model, positions, members, scale, out);
      break;
  }
}

}  // namespace

void pairwise_force_full(const ForceModel& model, std::span<const double> positions,
                         std::span<double> out) {
  check_system(model, positions, out);
  const std::size_t n = positions.size() / model.dim();
  std::vector<std::uint32_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<std::uint32_t>(i);
  group_interactions(model, positions, all, 1.0 / static_cast<double>(n - 1), out);
  add_drift(model, positions, out);
}

std::vector<double> pairwise_force_full(const ForceModel& model,
                                        std::span<const double> positions) {
  std::vector<double> out(positions.size());
  pairwise_force_full(model, positions, out);
  return out;
}

void pairwise_force_batched(const ForceModel& model, std::span<const double> positions,
                            const Division& division, std::span<double> out) {
  check_system(model, positions, out);
  const std::size_t n = positions.size() / model.dim();
  if (division.n_particles() != n) {
    throw InvalidPartitionError("division covers " + std::to_string(division.n_particles()) +
                                " particles, system has " + std::to_string(n));
  }
  if (division.batch_size() < 2) throw InvalidPartitionError("batch size must be at least 2");
  const double scale = 1.0 / static_cast<double>(division.batch_size() - 1);
  for (std::size_t c = 0; c < division.batch_count(); ++c) {
    group_interactions(model, positions, division.batch(c), scale, out);
  }
  add_drift(model, positions, out);
}

std::vector<double> pairwise_force_batched(const ForceModel& model,
                                           std::span<const double> positions,
                                           const Division& division) {
  std::vector<double> out(positions.size());
  pairwise_force_batched(model, positions, division, out);
  return out;
}

void pairwise_force_full_fast(const ForceModel& model, std::span<const double> positions,
                              std::span<double> out) {
  if (model.kernel_kind() != KernelKind::sine) {
    pairwise_force_full(model, positions, out);
    return;
  }
  check_system(model, positions, out);
  const std::size_t d = model.dim();
  const std::size_t n = positions.size() / d;
  const double scale = model.coupling() / static_cast<double>(n - 1);
  std::vector<Kahan> sin_sum(d), cos_sum(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      sin_sum[k].add(std::sin(positions[i * d + k]));
      cos_sum[k].add(std::cos(positions[i * d + k]));
    }
  }
  // sum_{j != i} sin(x_i - x_j) = sin x_i C - cos x_i S; the j = i term is 0.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double x = positions[i * d + k];
      out[i * d + k] = scale * (std::sin(x) * cos_sum[k].sum - std::cos(x) * sin_sum[k].sum);
    }
  }
  add_drift(model, positions, out);
}

// ---------------------------------------------------------------------------

double tau0(const DeclaredConstants& c) {
  if (!(c.alpha > 0.0) || !(c.L0 > 0.0)) {
    throw ConfigError("tau0 needs positive alpha and L0");
  }
  return std::min(c.alpha / (2.0 * c.L0 * c.L0), 1.0 / (2.0 * c.alpha));
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Deterministic points of the cube [-R, R]^d lying in the ball of radius R.
std::vector<std::vector<double>> ball_grid(std::size_t d, double radius, int points) {
  std::vector<std::vector<double>> grid;
  const double h = 2.0 * radius / static_cast<double>(points - 1);
  std::vector<int> idx(d, 0);
  while (true) {
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = -radius + h * idx[k];
    if (norm(x) <= radius * (1.0 + 1e-12)) grid.push_back(std::move(x));
    std::size_t k = 0;
    while (k < d && ++idx[k] == points) idx[k++] = 0;
    if (k == d) break;
  }
  return grid;
}

std::vector<std::vector<double>> unit_directions(std::size_t d, int points) {
  std::vector<std::vector<double>> dirs;
  if (d == 1) return {{1.0}, {-1.0}};
  for (int a = 0; a < points; ++a) {
    const double angle = 2.0 * std::numbers::pi * a / points;
    std::vector<double> u(d, 0.0);
    u[0] = std::cos(angle);
    u[1] = std::sin(angle);
    dirs.push_back(std::move(u));
  }
  // Remaining axes, both signs.
  for (std::size_t k = 2; k < d; ++k) {
    std::vector<double> u(d, 0.0);
    u[k] = 1.0;
    dirs.push_back(u);
    u[k] = -1.0;
    dirs.push_back(u);
  }
  return dirs;
}

}  // namespace

AssumptionReport check_assumptions(const ForceModel& model, double grid_radius,
                                   int grid_points) {
  if (grid_points < 2) throw ConfigError("check_assumptions needs grid_points >= 2");
  if (!(grid_radius > 0.0)) throw ConfigError("check_assumptions needs a positive grid radius");
  constexpr double kSlack = 1e-9;

  const std::size_t d = model.dim();
  const auto& c = model.declared();
  AssumptionReport report;
  report.tau0 = tau0(c);

  const auto grid = ball_grid(d, grid_radius, grid_points);
  const double h = 2.0 * grid_radius / static_cast<double>(grid_points - 1);
  std::vector<double> b(d), b_shift(d), k0(d), k_plus(d), k_minus(d), shifted(d);

  report.l0_ok = true;
  report.l1_ok = true;
  report.dissipation_ok = true;
  for (const auto& x : grid) {
    model.drift(x, b);
    const double nx = norm(x);
    if (!(norm(b) <= c.L0 * (nx + 1.0) * (1.0 + kSlack))) report.l0_ok = false;
    double x_dot_b = 0.0;
    for (std::size_t k = 0; k < d; ++k) x_dot_b += x[k] * b[k];
    if (!(-x_dot_b >= c.alpha * nx * nx - c.theta - kSlack * (1.0 + nx * nx))) {
      report.dissipation_ok = false;
    }

    model.kernel(x, k0);
    if (!(norm(k0) <= c.L1 * (1.0 + kSlack) + kSlack)) report.l1_ok = false;

    // Difference quotients along each axis bound |grad b|, |grad K|, |grad^2 K|
    // from below (mean value theorem), so they never reject a valid constant.
    for (std::size_t axis = 0; axis < d; ++axis) {
      shifted = x;
      shifted[axis] += h;
      model.drift(shifted, b_shift);
      for (std::size_t k = 0; k < d; ++k) b_shift[k] = (b_shift[k] - b[k]) / h;
      if (!(norm(b_shift) <= c.L0 * (1.0 + kSlack))) report.l0_ok = false;

      model.kernel(shifted, k_plus);
      shifted[axis] -= 2.0 * h;
      model.kernel(shifted, k_minus);
      std::vector<double> first(d), second(d);
      for (std::size_t k = 0; k < d; ++k) {
        first[k] = (k_plus[k] - k0[k]) / h;
        second[k] = (k_plus[k] - 2.0 * k0[k] + k_minus[k]) / (h * h);
      }
      if (!(norm(first) <= c.L1 * (1.0 + kSlack) + kSlack)) report.l1_ok = false;
      if (!(norm(second) <= c.L1 * (1.0 + kSlack) + 1e-6)) report.l1_ok = false;
    }
  }

  // kappa probe: for each separation r take the worst quotient over the pairs
  // (r u, 0) and (r/2 u, -r/2 u).
  const auto dirs = unit_directions(d, grid_points);
  const double factor = -2.0 / (model.sigma() * model.sigma());
  std::vector<double> bx(d), by(d), x(d), y(d);
  for (int step = 1; step <= grid_points; ++step) {
    const double r = grid_radius * step / static_cast<double>(grid_points);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& u : dirs) {
      for (int form = 0; form < 2; ++form) {
        for (std::size_t k = 0; k < d; ++k) {
          x[k] = form == 0 ? r * u[k] : 0.5 * r * u[k];
          y[k] = form == 0 ? 0.0 : -0.5 * r * u[k];
        }
        model.drift(x, bx);
        model.drift(y, by);
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += (x[k] - y[k]) * (bx[k] - by[k]);
        worst = std::min(worst, factor * dot / (r * r));
      }
    }
    report.kappa_samples.push_back({r, worst});
  }
  report.kappa_asymptotically_positive = true;
  for (const auto& s : report.kappa_samples) {
    if (s.r >= 0.5 * grid_radius && !(s.kappa_lower > 0.0)) {
      report.kappa_asymptotically_positive = false;
    }
  }
  return report;
}

}  // namespace rbm
