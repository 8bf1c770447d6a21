#pragma once

/**
 * @file parallel.hpp
 * @brief Index-parallel loops capped by the FOL_THREADS environment variable.
 *
 * Every index writes only its own output slot, so results do not depend on the
 * thread count or on scheduling.
 */

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fol {

/// Worker count: FOL_THREADS if set to a positive integer, else hardware concurrency.
inline unsigned thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FOL_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return hw;
}

/// Runs f(i) for i in [0, count). The first exception thrown by any worker is rethrown.
template <class F>
void parallel_for(std::size_t count, F&& f) {
  const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(thread_count(), count));
  if (nt <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!err) err = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace fol
