#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace warptrack {

// Deterministic data parallelism: work is cut into fixed-size blocks whose
// boundaries depend only on (n, grain), never on the thread count. Each block
// writes results that depend only on its own index range, so outputs are
// identical for any number of threads. Reductions combine per-block partials
// serially in block order.

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(block_index, begin, end) over [0,n) in blocks of `grain` indices.
template <class Fn>
void parallel_blocks(std::size_t n, std::size_t grain, int threads, Fn&& fn) {
  if (n == 0) return;
  if (grain == 0) grain = 1;
  const std::size_t nblocks = (n + grain - 1) / grain;
  threads = resolve_threads(threads);
  if (threads <= 1 || nblocks <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) {
      const std::size_t lo = b * grain;
      fn(b, lo, std::min(n, lo + grain));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= nblocks) return;
      const std::size_t lo = b * grain;
      fn(b, lo, std::min(n, lo + grain));
    }
  };

  const int spawn = std::min<int>(threads, static_cast<int>(nblocks)) - 1;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

/// Plain parallel map over indices; fn(i) must only write state owned by i.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn, std::size_t grain = 512) {
  parallel_blocks(n, grain, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

inline std::size_t block_count(std::size_t n, std::size_t grain) {
  return grain == 0 ? n : (n + grain - 1) / grain;
}

}  // namespace warptrack
