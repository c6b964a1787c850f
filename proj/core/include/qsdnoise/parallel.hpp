#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qsdnoise {

/// Worker count used when the caller passes 0.
inline std::size_t default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs `body(job)` for job in [0, n_jobs) on up to `threads` workers.
///
/// Jobs are claimed from a shared counter, so completion order is arbitrary;
/// callers write into per-job slots and reduce afterwards. The first
/// exception thrown by any job is rethrown on the calling thread once all
/// workers have stopped.
template <typename Body>
void parallel_for(std::size_t n_jobs, std::size_t threads, Body&& body) {
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, n_jobs);
  if (threads <= 1) {
    for (std::size_t job = 0; job < n_jobs; ++job) body(job);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t job = next.fetch_add(1, std::memory_order_relaxed);
      if (job >= n_jobs) return;
      try {
        body(job);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  pool.clear();  // joins

  if (error) std::rethrow_exception(error);
}

/// Fixed block size for ensemble reductions. Blocks, not workers, define the
/// summation order, so results do not depend on the thread count.
inline constexpr std::size_t kReductionBlock = 16;

}  // namespace qsdnoise
