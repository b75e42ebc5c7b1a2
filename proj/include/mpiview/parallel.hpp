// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace mpiview {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

/// Worker count used by row-parallel kernels; 0 selects hardware concurrency.
inline void set_thread_count(int n) { detail::thread_setting().store(std::max(0, n)); }

inline int thread_count() {
  const int n = detail::thread_setting().load();
  if (n > 0) return n;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs fn(row) for every row in [0, rows). Rows are split into contiguous
/// chunks; each row is written by exactly one worker, so results do not depend
/// on the worker count.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const int workers = std::min(thread_count(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      const int begin = static_cast<int>(static_cast<long long>(rows) * w / workers);
      const int end = static_cast<int>(static_cast<long long>(rows) * (w + 1) / workers);
      pool.emplace_back([&, w, begin, end] {
        try {
          for (int r = begin; r < end; ++r) fn(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mpiview
