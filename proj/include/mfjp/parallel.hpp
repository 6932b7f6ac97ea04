#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfjp {

/// MFJP_THREADS if set and positive, otherwise the hardware concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("MFJP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls body(i) for i in [0, n) on up to `threads` workers. Work items are handed
/// out in increasing order; callers write results into per-index slots so the outcome
/// does not depend on scheduling. On failure the exception of the lowest failing index
/// is rethrown after joining.
inline void parallel_for(long n, int threads, const std::function<void(long)>& body) {
  if (threads <= 0) threads = default_threads();
  threads = static_cast<int>(std::min<long>(threads, n));
  if (threads <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> cursor{0};
  std::exception_ptr failure;
  long failed_at = n;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (long i = cursor++; i < n; i = cursor++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
        cursor = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mfjp
