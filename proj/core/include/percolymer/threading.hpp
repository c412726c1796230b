#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace percolymer {

// Thread count resolution: explicit request, else PERCOLYMER_THREADS, else
// hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, count) across workers pulling indices from a shared
// counter. Each index must be independent; callers write results into
// index-addressed slots and reduce in index order afterwards, so outputs do
// not depend on the thread count.
template <class F>
void parallel_for(std::int64_t count, int threads, F&& fn) {
  const int workers = resolve_threads(threads);
  if (workers <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  auto work = [&] {
    try {
      while (true) {
        const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count || failed.load(std::memory_order_relaxed)) return;
        fn(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!failed.exchange(true)) error = std::current_exception();
    }
  };
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace percolymer
