#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace isg {

inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Chunked index-range parallelism. Small ranges run inline; callers must keep
// per-index writes disjoint. Results that feed floating-point reductions
// should be written to per-index slots and reduced sequentially so the output
// does not depend on the thread count.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn, int grain = 1024) {
  if (count <= 0) {
    return;
  }
  const int max_chunks = std::max(1, (count + grain - 1) / grain);
  const int n_threads = std::clamp(threads, 1, max_chunks);
  if (n_threads == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  const int chunk = (count + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) {
    th.join();
  }
}

}  // namespace isg
