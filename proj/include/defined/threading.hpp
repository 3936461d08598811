#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace defined {

/// Worker count: DEFINED_THREADS env var if set (>=1), else hardware count.
inline int max_threads() {
  if (const char* env = std::getenv("DEFINED_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run `fn(chunk, begin, end)` over `n_items` split into `n_chunks`
/// contiguous ranges. The chunking depends only on (n_items, n_chunks),
/// never on the worker count, so per-chunk results can be reduced in chunk
/// order to give answers that are independent of DEFINED_THREADS.
inline void parallel_chunks(long n_items, long n_chunks,
                            const std::function<void(long, long, long)>& fn) {
  if (n_items <= 0) return;
  if (n_chunks < 1) n_chunks = 1;
  if (n_chunks > n_items) n_chunks = n_items;
  int workers = max_threads();
  auto chunk_range = [&](long c, long& b, long& e) {
    b = c * n_items / n_chunks;
    e = (c + 1) * n_items / n_chunks;
  };
  if (workers <= 1 || n_chunks == 1) {
    for (long c = 0; c < n_chunks; ++c) {
      long b, e;
      chunk_range(c, b, e);
      fn(c, b, e);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::size_t active = std::min<std::size_t>(workers, n_chunks);
  for (std::size_t w = 0; w < active; ++w) {
    pool.emplace_back([&, w] {
      for (long c = static_cast<long>(w); c < n_chunks; c += static_cast<long>(active)) {
        long b, e;
        chunk_range(c, b, e);
        fn(c, b, e);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace defined
