#pragma once

#include <cstdint>
#include <exception>
#include <random>
#include <vector>

namespace cubic_observer {

// Serial is the reference path; Parallel distributes independent restarts
// over OpenMP threads. Both produce identical results.
enum class ExecPolicy { Serial, Parallel };

// Per-restart generator; depends only on (seed, restart).
inline std::mt19937_64 restart_rng(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x9e3779b9U};
  return std::mt19937_64(seq);
}

// Runs fn(0..count-1) and returns the results in restart order. The first
// exception (by restart index) is rethrown after all restarts finish.
template <class Result, class Fn>
std::vector<Result> run_restarts(int count, ExecPolicy policy, Fn&& fn) {
  std::vector<Result> results(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  if (policy == ExecPolicy::Serial) {
    for (int i = 0; i < count; ++i) {
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < count; ++i) {
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return results;
}

}  // namespace cubic_observer
