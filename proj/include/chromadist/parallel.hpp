// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace chromadist {

/// Worker count: `requested` if non-zero, else CHROMADIST_THREADS if set,
/// else the hardware concurrency. The environment variable also caps explicit
/// requests.
inline std::size_t thread_count(std::size_t requested = 0) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CHROMADIST_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) cap = static_cast<std::size_t>(v);
    } catch (...) {
    }
    if (requested == 0) return cap;
  }
  return requested == 0 ? cap : std::min(requested, cap);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
/// handled exactly once; results must be written to per-index slots so the
/// outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace chromadist
