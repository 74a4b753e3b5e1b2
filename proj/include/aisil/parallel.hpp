#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace aisil {

inline unsigned default_worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Static block partition of [0, n) across `workers` threads.  Callers must
// make per-index work independent; determinism comes from per-index RNG
// streams, not from scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned workers = 0) {
  if (workers == 0) workers = default_worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  const std::size_t chunk = (n + nw - 1) / nw;
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace aisil
