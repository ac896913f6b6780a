#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace patrec {

/// Global worker cap, settable from the CLI --threads flag.
inline std::atomic<int>& max_threads_slot() {
  static std::atomic<int> slot{0};  // 0 = auto
  return slot;
}

inline void set_max_threads(int n) { max_threads_slot().store(n); }

inline int effective_threads() {
  int cap = max_threads_slot().load();
  unsigned hw = std::thread::hardware_concurrency();
  int autodetected = hw == 0 ? 1 : static_cast<int>(hw);
  return cap > 0 ? std::min(cap, autodetected) : autodetected;
}

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slots; results are then independent of the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = std::min<std::size_t>(effective_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace patrec
