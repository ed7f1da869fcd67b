/// @file threading.hpp
/// @brief Worker-count policy and a batch-index parallel loop.
///
/// MGSOLVE_THREADS caps internal parallelism; 0 (or 1) selects the sequential
/// deterministic mode. Unset defaults to the hardware concurrency. Callers
/// are responsible for making parallel results order-independent; the
/// training loop does so by pre-drawing all randomness and merging gradients
/// in batch-index order, which makes results bitwise identical at any
/// thread count.

#pragma once

#include <cstddef>
#include <functional>

namespace mgcnn {

/// Resolved worker count (>= 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. The first
/// exception thrown by any index is rethrown on the calling thread.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Peak resident set size of the process (VmHWM), in bytes; 0 if unknown.
std::size_t process_peak_rss_bytes();

}  // namespace mgcnn
