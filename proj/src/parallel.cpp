#include "salem/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace salem {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_threads(unsigned n) { g_threads.store(std::max(1u, n)); }
unsigned threads() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t t = std::min<std::size_t>(threads(), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::size_t> error_index(t, n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t lo = n * k / t, hi = n * (k + 1) / t;
    pool.emplace_back([&, k, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          body(i);
        } catch (...) {
          errors[k] = std::current_exception();
          error_index[k] = i;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (std::size_t k = 0; k < t; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
  }
}

}  // namespace salem
