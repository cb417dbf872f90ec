#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace poisnet {

// Process-wide worker count for data-parallel loops. Default 1 keeps every
// run bit-reproducible without opt-in.
inline std::atomic<int>& thread_count() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_threads(int n) { thread_count().store(n < 1 ? 1 : n); }

// Runs fn(i) for i in [begin, end). Each index is computed by exactly one
// worker and writes disjoint outputs, so results do not depend on the
// schedule.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn) {
  const int workers = thread_count().load();
  const std::ptrdiff_t n = end - begin;
  if (workers <= 1 || n < 2) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::ptrdiff_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::ptrdiff_t lo = begin + w * chunk;
    const std::ptrdiff_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace poisnet
