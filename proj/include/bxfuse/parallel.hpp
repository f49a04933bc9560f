#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace bxfuse {

/// Number of workers implied by a jobs setting (0 = logical cores).
inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run fn(i) for i in [0, count) over `threads` workers in contiguous
/// chunks. Each index is visited exactly once; callers own determinism by
/// writing only index-local outputs (or per-index partials merged in index
/// order afterwards).
inline void parallel_for(int count, int threads,
                         const std::function<void(int)>& fn) {
  threads = resolve_jobs(threads);
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  if (threads > count) threads = count;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace bxfuse
