#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace sqdr {

// Runs f(i) for i in [0, n) on up to `threads` workers, striding statically.
// Callers write to index-addressed slots so results do not depend on the
// thread count.
template <typename F>
void ParallelFor(size_t n, int threads, F&& f) {
  const size_t workers = std::min(n, static_cast<size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sqdr
