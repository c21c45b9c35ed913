#pragma once

// Thread-count resolution and a minimal fork-join parallel loop. The env var
// LANGEVIN_RANK_THREADS caps parallelism everywhere (0 or unset = auto).

#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ldrank {

inline int effective_threads(int requested = 0) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int limit = hw;
  if (const char* env = std::getenv("LANGEVIN_RANK_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) limit = cap;
  }
  int t = requested > 0 ? requested : limit;
  if (t > limit) t = limit;
  return t > 0 ? t : 1;
}

/// Calls fn(i) for i in [begin, end) using static contiguous partitioning.
/// Callers that need deterministic results must write to index-addressed
/// storage and reduce sequentially afterwards.
template <typename Fn>
void parallel_for(long begin, long end, int num_threads, Fn&& fn) {
  const long count = end - begin;
  if (count <= 0) return;
  const int t = effective_threads(num_threads);
  if (t <= 1 || count == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(t < count ? t : count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    const long lo = begin + count * w / workers;
    const long hi = begin + count * (w + 1) / workers;
    pool.emplace_back([&, lo, hi]() {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ldrank
