#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "stepdirect/errors.hpp"

namespace stepdirect {

/// Worker count: an explicit positive request wins, then STEPDIRECT_THREADS, then 1.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (requested < 0) throw DomainError("threads must be positive");
  if (const char* env = std::getenv("STEPDIRECT_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw DomainError(std::string("STEPDIRECT_THREADS is not a positive integer: ") + env);
  }
  return 1;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Tasks must not share
/// mutable state. The exception of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace stepdirect
