#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stablelab {

/// Runs body(task) for task in [0, tasks) on up to `threads` workers.
/// Tasks must write only to their own output slots; the result is then
/// independent of the worker count.
template <class Body>
void parallel_for(std::size_t tasks, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || tasks <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) body(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks) return;
      try {
        body(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n = static_cast<std::size_t>(threads) < tasks ? threads : static_cast<unsigned>(tasks);
  pool.reserve(n);
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace stablelab
