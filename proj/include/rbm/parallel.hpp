#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rbm {

/// Worker count used when a caller passes 0.
inline std::size_t default_threads() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed in index order; the first exception (lowest index) is rethrown
/// after all workers finish. Results must be written to per-index slots.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  if (threads == 0) threads = default_threads();
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Deterministic chunked reduction: items [0, n) are grouped into fixed
/// chunks of `chunk` items, each chunk folds into its own accumulator (in
/// item order), and the chunk accumulators are merged in chunk order. The
/// result depends on `chunk` but not on `threads`.
template <class Acc, class MakeAcc, class Body, class Merge>
Acc chunked_reduce(std::size_t n, std::size_t chunk, std::size_t threads, MakeAcc make_acc,
                   Body body, Merge merge) {
  if (chunk == 0) chunk = 1;
  if (threads == 0) threads = default_threads();
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  Acc total = make_acc();
  // Chunks run in waves of `threads` so only one wave of partial results is alive.
  for (std::size_t wave = 0; wave < n_chunks; wave += threads) {
    const std::size_t width = std::min(threads, n_chunks - wave);
    std::vector<Acc> parts;
    parts.reserve(width);
    for (std::size_t c = 0; c < width; ++c) parts.push_back(make_acc());
    parallel_for(width, threads, [&](std::size_t c) {
      const std::size_t lo = (wave + c) * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      for (std::size_t i = lo; i < hi; ++i) body(parts[c], i);
    });
    for (auto& part : parts) merge(total, part);
  }
  return total;
}

}  // namespace rbm
