#pragma once

#include <cstddef>
#include <functional>

namespace plabel {

// Runs fn(i) for i in [0, n) on up to `threads` workers (contiguous chunks).
// Callers write results into per-index slots, so output never depends on
// the thread count. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace plabel
