#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace satsweep {

// Runs fn(i) for i in [begin, end) on up to `threads` workers. Work is split
// into contiguous chunks; callers must only write disjoint outputs per index,
// which keeps results independent of the thread count.
template <typename Fn>
void parallel_for(int64_t begin, int64_t end, int threads, Fn&& fn) {
  const int64_t n = end - begin;
  if (n <= 0) return;
  int workers = std::max(1, threads);
  workers = static_cast<int>(std::min<int64_t>(workers, n));
  if (workers == 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int64_t lo = begin + w * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline int default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace satsweep
