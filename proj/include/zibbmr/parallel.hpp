#pragma once

// Deterministic parallel map: static block partition over [0, n), one
// std::thread per block.  Tasks must write only to their own slots; callers
// perform reductions serially afterwards, so results never depend on the
// number of workers or on scheduling.

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "zibbmr/types.hpp"

namespace zibbmr {

inline void parallel_for(Index n, int threads,
                         const std::function<void(Index)>& fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  const Index workers = std::min<Index>(threads, n);
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (n + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index lo = w * chunk;
    const Index hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi] {
      try {
        for (Index i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace zibbmr
