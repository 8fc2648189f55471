#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace phasesync::par {

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to `threads`
/// workers. threads <= 1 degenerates to a single inline call.
inline void chunked(int n, int threads,
                    const std::function<void(int, int)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1 || n <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  int base = n / threads, rem = n % threads;
  int start = 0;
  for (int t = 0; t < threads; ++t) {
    int len = base + (t < rem ? 1 : 0);
    int stop = start + len;
    pool.emplace_back([&fn, start, stop]() { fn(start, stop); });
    start = stop;
  }
  for (auto& th : pool) th.join();
}

}  // namespace phasesync::par
