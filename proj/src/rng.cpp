#include "rbm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// Stream tags keep the generators of one seed apart.
constexpr std::uint64_t kPartitionTag = 0x7061727469746eULL;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

inline std::array<std::uint32_t, 2> split_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

// Box-Muller on one Philox block: returns the pair (r cos t, r sin t).
inline std::pair<double, double> gaussian_pair(std::uint64_t index, std::uint64_t stream,
                                               std::array<std::uint32_t, 2> key) {
  const auto w = philox4x32({static_cast<std::uint32_t>(index),
                             static_cast<std::uint32_t>(index >> 32),
                             static_cast<std::uint32_t>(stream),
                             static_cast<std::uint32_t>(stream >> 32)},
                            key);
  const double u1 = to_unit_open0(join(w[0], w[1]));
  const double u2 = to_unit_open0(join(w[2], w[3]));
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  std::uint64_t z = parent ^ (tag * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
    : key_(split_key(seed)), stream_id_(stream_id) {}

std::uint64_t CounterStream::next_u64() noexcept {
  if (used_ >= 4) {
    buffer_ = philox4x32({static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_id_),
                          static_cast<std::uint32_t>(stream_id_ >> 32)},
                         key_);
    ++block_;
    used_ = 0;
  }
  const std::uint64_t v = join(buffer_[used_], buffer_[used_ + 1]);
  used_ += 2;
  return v;
}

std::uint64_t CounterStream::below(std::uint64_t bound) noexcept {
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double CounterStream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

// ---------------------------------------------------------------------------

NoisePlan::NoisePlan(std::uint64_t seed, std::size_t n_particles, std::size_t dim,
                     double horizon, std::size_t levels)
    : seed_(seed), n_(n_particles), d_(dim), horizon_(horizon), levels_(levels),
      key_(split_key(seed)) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("noise plan horizon must be positive and finite");
  }
  if (n_particles == 0 || dim == 0) {
    throw ConfigError("noise plan needs at least one particle and one coordinate");
  }
  if (levels > 62) {
    throw ConfigError("noise plan depth " + std::to_string(levels) +
                      " overflows the 64-bit fine-index address space");
  }
  if (n_particles > (std::size_t{1} << 40) / dim) {
    throw ConfigError("noise plan particle-coordinate address space overflows");
  }
  finest_dt_ = std::ldexp(horizon, -static_cast<int>(levels));
  fine_scale_ = std::sqrt(finest_dt_);
}

double NoisePlan::dt(std::size_t level) const {
  if (level > levels_) throw IndexError("level exceeds noise plan depth");
  return std::ldexp(horizon_, -static_cast<int>(level));
}

std::size_t NoisePlan::steps(std::size_t level) const {
  if (level > levels_) throw IndexError("level exceeds noise plan depth");
  return std::size_t{1} << level;
}

std::size_t NoisePlan::level_for(double tau) const {
  for (std::size_t level = 0; level <= levels_; ++level) {
    if (dt(level) == tau) return level;
  }
  throw ConfigError("time step " + std::to_string(tau) + " is not horizon/2^k for k <= " +
                    std::to_string(levels_));
}

double NoisePlan::fine_increment(std::size_t particle, std::size_t coord,
                                 std::size_t fine_index) const {
  if (particle >= n_ || coord >= d_) throw IndexError("particle or coordinate out of range");
  if (fine_index >= (std::size_t{1} << levels_)) throw IndexError("fine index beyond horizon");
  const auto [even, odd] = gaussian_pair(fine_index >> 1, particle * d_ + coord, key_);
  return fine_scale_ * ((fine_index & 1u) ? odd : even);
}

void NoisePlan::fine_block(std::size_t first_fine, std::size_t count,
                           std::span<double> out) const {
  const std::size_t width = n_ * d_;
  const std::size_t end = first_fine + count;
  for (std::size_t pc = 0; pc < width; ++pc) {
    for (std::size_t f = first_fine & ~std::size_t{1}; f < end; f += 2) {
      const auto [even, odd] = gaussian_pair(f >> 1, pc, key_);
      if (f >= first_fine) out[(f - first_fine) * width + pc] = fine_scale_ * even;
      if (f + 1 < end && f + 1 >= first_fine) out[(f + 1 - first_fine) * width + pc] = fine_scale_ * odd;
    }
  }
}

namespace {

// In-place pairwise reduction of `rounds` dyadic levels over rows of `width`.
void reduce_levels(std::span<double> buffer, std::size_t rows, std::size_t width,
                   std::size_t rounds) {
  for (std::size_t r = 0; r < rounds; ++r) {
    rows /= 2;
    for (std::size_t j = 0; j < rows; ++j) {
      const double* left = buffer.data() + (2 * j) * width;
      const double* right = left + width;
      double* dst = buffer.data() + j * width;
      for (std::size_t k = 0; k < width; ++k) dst[k] = left[k] + right[k];
    }
  }
}

}  // namespace

void NoisePlan::increments_block(std::size_t dt_level, std::size_t first_step,
                                 std::size_t count, std::span<double> out) const {
  if (dt_level > levels_) throw IndexError("dt level exceeds noise plan depth");
  if (first_step + count > steps(dt_level)) throw IndexError("macro step beyond horizon");
  const std::size_t width = n_ * d_;
  if (out.size() < count * width) throw IndexError("increment buffer too small");
  const std::size_t shift = levels_ - dt_level;
  const std::size_t fine_rows = count << shift;
  if (shift == 0) {
    fine_block(first_step, count, out);
    return;
  }
  std::vector<double> scratch(fine_rows * width);
  fine_block(first_step << shift, fine_rows, scratch);
  reduce_levels(scratch, fine_rows, width, shift);
  std::copy_n(scratch.begin(), count * width, out.begin());
}

std::vector<double> NoisePlan::increments(std::size_t dt_level, std::size_t macro_step) const {
  std::vector<double> out(n_ * d_);
  increments_block(dt_level, macro_step, 1, out);
  return out;
}

// ---------------------------------------------------------------------------

NoiseCursor::NoiseCursor(const NoisePlan& plan, std::size_t level, std::size_t first_step)
    : plan_(&plan), level_(level), step_(first_step) {
  if (level > plan.levels()) throw IndexError("cursor level exceeds noise plan depth");
  const std::size_t width = plan.n_particles() * plan.dim();
  const std::size_t fine_per_step = std::size_t{1} << (plan.levels() - level);
  constexpr std::size_t kTargetDoubles = std::size_t{1} << 17;
  chunk_ = std::max<std::size_t>(2, kTargetDoubles / std::max<std::size_t>(1, width * fine_per_step));
  chunk_ = std::min(chunk_, std::size_t{256});
  buffer_.resize(chunk_ * width);
}

std::span<const double> NoiseCursor::next() {
  const std::size_t width = plan_->n_particles() * plan_->dim();
  if (step_ < block_start_ || step_ >= block_start_ + block_count_) {
    const std::size_t total = plan_->steps(level_);
    if (step_ >= total) throw IndexError("noise cursor ran past the plan horizon");
    block_start_ = step_;
    block_count_ = std::min(chunk_, total - step_);
    plan_->increments_block(level_, block_start_, block_count_, buffer_);
  }
  const std::size_t offset = (step_ - block_start_) * width;
  ++step_;
  return std::span<const double>(buffer_).subspan(offset, width);
}

// ---------------------------------------------------------------------------

Division::Division(std::vector<std::uint32_t> order, std::size_t batch_size)
    : order_(std::move(order)), p_(batch_size) {
  const std::size_t n = order_.size();
  if (p_ < 2) throw InvalidPartitionError("batch size must be at least 2");
  if (n % p_ != 0) {
    throw InvalidPartitionError("batch size " + std::to_string(p_) + " does not divide N = " +
                                std::to_string(n));
  }
  std::vector<char> seen(n, 0);
  for (std::uint32_t idx : order_) {
    if (idx >= n || seen[idx]) {
      throw InvalidPartitionError("division is not an exact partition of the particle indices");
    }
    seen[idx] = 1;
  }
}

Division Division::from_batches(const std::vector<std::vector<std::uint32_t>>& batches) {
  if (batches.empty()) throw InvalidPartitionError("division has no batches");
  const std::size_t p = batches.front().size();
  std::vector<std::uint32_t> order;
  for (const auto& batch : batches) {
    if (batch.size() != p) throw InvalidPartitionError("batches have unequal sizes");
    order.insert(order.end(), batch.begin(), batch.end());
  }
  return Division(std::move(order), p);
}

// ---------------------------------------------------------------------------

PartitionPlan::PartitionPlan(std::uint64_t seed, std::size_t n_particles,
                             std::size_t batch_size, std::size_t n_steps)
    : seed_(seed), n_(n_particles), p_(batch_size), n_steps_(n_steps) {
  if (batch_size < 2) throw InvalidPartitionError("batch size must be at least 2");
  if (n_particles % batch_size != 0) {
    throw InvalidPartitionError("batch size " + std::to_string(batch_size) +
                                " does not divide N = " + std::to_string(n_particles));
  }
}

Division PartitionPlan::division(std::size_t step) const {
  if (step >= n_steps_) throw IndexError("partition step " + std::to_string(step) + " out of range");
  std::vector<std::uint32_t> order(n_);
  for (std::size_t i = 0; i < n_; ++i) order[i] = static_cast<std::uint32_t>(i);
  CounterStream stream(derive_seed(seed_, kPartitionTag), step);
  for (std::size_t i = n_ - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(stream.below(i + 1));
    std::swap(order[i], order[j]);
  }
  return Division(std::move(order), p_);
}

NoisePlan make_noise_plan(std::uint64_t seed, std::size_t n, std::size_t d, double horizon,
                          std::size_t levels) {
  return NoisePlan(seed, n, d, horizon, levels);
}

PartitionPlan make_partition_plan(std::uint64_t seed, std::size_t n, std::size_t p,
                                  std::size_t n_steps) {
  return PartitionPlan(seed, n, p, n_steps);
}

}  // namespace rbm
