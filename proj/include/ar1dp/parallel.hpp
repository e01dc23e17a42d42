#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ar1dp {

/// Runs f(i) for i in [0, n) on up to `threads` threads in contiguous chunks.
/// f must only write to slot i, so the result does not depend on the thread
/// count.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (std::size_t w = 1; w < threads; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&f, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (std::size_t i = 0; i < std::min(n, chunk); ++i) f(i);
}

}  // namespace ar1dp
