#pragma once

#include <cstddef>
#include <functional>

namespace kolmo {

/// Upper bound on worker threads used by assembly and path simulation.
/// 0 means "available parallelism".
void set_thread_limit(unsigned n);
unsigned thread_limit();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are
/// disjoint, so bodies writing only to their own index range need no locks.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace kolmo
