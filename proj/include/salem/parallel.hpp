#pragma once
// Fixed-partition parallel loops. Each index writes only its own output slot,
// so results never depend on the thread count.

#include <cstddef>
#include <functional>

namespace salem {

// Number of worker threads used by parallel_for; 1 runs inline.
void set_threads(unsigned n);
unsigned threads();

// Calls body(i) for i in [0, n). The first exception by index order is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace salem
