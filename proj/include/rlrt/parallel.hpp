#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rlrt::parallel {

/// Number of workers to use when the caller passes 0.
inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Calls body(i) for every i in [0, count) on `workers` threads. Indices are
/// handed out dynamically; the body must write only to slot i of its output.
/// The first exception thrown by any body is rethrown after all workers join.
template <class Body>
void for_each_index(std::size_t count, std::size_t workers, Body&& body) {
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count && !failed.load(); i = next.fetch_add(1)) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true);
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace rlrt::parallel
