#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rbm {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Output is a pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Mixes a tag into a parent seed (splitmix64 finalizer). Used for the
/// study -> grid point -> replica seed tree.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;

/// Uniform double in (0, 1] from the top 53 bits of `bits`.
inline double to_unit_open0(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Sequential view over a Philox stream: block k of stream (seed, stream_id)
/// is philox(counter = (k, stream_id), key = seed).
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on (0, 1].
  double uniform() noexcept { return to_unit_open0(next_u64()); }
  /// Uniform integer in [0, bound), unbiased (Lemire's method).
  std::uint64_t below(std::uint64_t bound) noexcept;
  double normal() noexcept;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Seeded Brownian increments for N particles in R^d on a dyadic time grid.
///
/// Level L (= `levels`) is the finest grid, step horizon / 2^L. Fine increments
/// are drawn statelessly from (seed, particle, coordinate, fine index); a level-k
/// increment is the pairwise sum of its two level-(k+1) children, left before
/// right, so every coarse increment is bitwise the sum of its two halves and the
/// same Brownian path drives every level.
class NoisePlan {
 public:
  NoisePlan(std::uint64_t seed, std::size_t n_particles, std::size_t dim, double horizon,
            std::size_t levels);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t n_particles() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  double horizon() const noexcept { return horizon_; }
  std::size_t levels() const noexcept { return levels_; }
  double finest_dt() const noexcept { return finest_dt_; }

  /// Step length at `level`: horizon / 2^level.
  double dt(std::size_t level) const;
  /// Number of macro steps at `level`: 2^level.
  std::size_t steps(std::size_t level) const;
  /// Level whose step equals tau exactly; ConfigError if none.
  std::size_t level_for(double tau) const;

  /// One fine-grid increment ~ Normal(0, finest_dt).
  double fine_increment(std::size_t particle, std::size_t coord, std::size_t fine_index) const;

  /// Increments over macro step `macro_step` at `dt_level`, row-major N x d.
  std::vector<double> increments(std::size_t dt_level, std::size_t macro_step) const;

  /// Increments for `count` consecutive macro steps starting at `first_step`,
  /// laid out [step][particle][coord]. Bitwise equal to repeated increments().
  void increments_block(std::size_t dt_level, std::size_t first_step, std::size_t count,
                        std::span<double> out) const;

 private:
  void fine_block(std::size_t first_fine, std::size_t count, std::span<double> out) const;

  std::uint64_t seed_;
  std::size_t n_;
  std::size_t d_;
  double horizon_;
  std::size_t levels_;
  double finest_dt_;
  double fine_scale_;
  std::array<std::uint32_t, 2> key_;
};

/// Buffered sequential reader of increments at one level.
class NoiseCursor {
 public:
  NoiseCursor(const NoisePlan& plan, std::size_t level, std::size_t first_step = 0);

  /// Increments for the next macro step (valid until the following call).
  std::span<const double> next();
  std::size_t position() const noexcept { return step_; }

 private:
  const NoisePlan* plan_;
  std::size_t level_;
  std::size_t step_;
  std::size_t block_start_ = 0;
  std::size_t block_count_ = 0;
  std::size_t chunk_;
  std::vector<double> buffer_;
};

/// One division of {0..N-1} into q = N/p batches of equal size p >= 2.
/// Batch c is order[c p .. (c+1) p).
class Division {
 public:
  Division() = default;
  /// Validates that `order` is a permutation and p >= 2 divides N.
  Division(std::vector<std::uint32_t> order, std::size_t batch_size);
  /// Validates equal sizes and exact coverage.
  static Division from_batches(const std::vector<std::vector<std::uint32_t>>& batches);

  std::size_t n_particles() const noexcept { return order_.size(); }
  std::size_t batch_size() const noexcept { return p_; }
  std::size_t batch_count() const noexcept { return p_ == 0 ? 0 : order_.size() / p_; }
  std::span<const std::uint32_t> batch(std::size_t c) const {
    return std::span<const std::uint32_t>(order_).subspan(c * p_, p_);
  }
  std::span<const std::uint32_t> order() const noexcept { return order_; }

 private:
  std::vector<std::uint32_t> order_;
  std::size_t p_ = 0;
};

/// Independent random divisions for each macro step, generated on demand by a
/// seeded shuffle-then-chunk of {0..N-1}.
class PartitionPlan {
 public:
  PartitionPlan(std::uint64_t seed, std::size_t n_particles, std::size_t batch_size,
                std::size_t n_steps);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t n_particles() const noexcept { return n_; }
  std::size_t batch_size() const noexcept { return p_; }
  std::size_t n_steps() const noexcept { return n_steps_; }

  Division division(std::size_t step) const;

 private:
  std::uint64_t seed_;
  std::size_t n_;
  std::size_t p_;
  std::size_t n_steps_;
};

NoisePlan make_noise_plan(std::uint64_t seed, std::size_t n, std::size_t d, double horizon,
                          std::size_t levels);
PartitionPlan make_partition_plan(std::uint64_t seed, std::size_t n, std::size_t p,
                                  std::size_t n_steps);

}  // namespace rbm
