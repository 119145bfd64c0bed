#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace icebench {

// Runs fn(0..n-1) across `workers` threads. fn(i) must only write state owned
// by index i, so results are identical for any worker count.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t n_threads = std::min<size_t>(static_cast<size_t>(workers), n);
  std::atomic<size_t> next{0};
  std::exception_ptr first_error = nullptr;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) break;
        try {
          fn(i);
        } catch (...) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) first_error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace icebench
