#include "unigs/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>

namespace unigs {

namespace {
std::atomic<int> g_threads{0};
}  // namespace

void set_thread_count(int threads) { g_threads = threads; }

int thread_count() {
  const int t = g_threads.load();
  return t > 0 ? t : std::max(1, omp_get_num_procs());
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const int threads = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (threads == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace unigs
