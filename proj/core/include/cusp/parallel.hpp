#pragma once

#include <cstddef>
#include <functional>

namespace cusp {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Indices are handed
/// out in contiguous blocks; callers write results into slot i, so the outcome
/// never depends on scheduling. The first exception thrown by any worker is
/// rethrown on the calling thread after all workers have stopped.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Resolves a requested thread count (0 = hardware concurrency, at least 1).
unsigned resolve_threads(unsigned requested);

}  // namespace cusp
