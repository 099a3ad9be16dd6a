#pragma once

#include <cstddef>
#include <functional>

namespace ceg {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write
// results into pre-sized slots indexed by i and reduce afterwards in index
// order, so the outcome is independent of the thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Resolves a thread-count request: n <= 0 falls back to the CEG_THREADS
// environment variable, then to 1.
int resolve_threads(int requested);

} // namespace ceg
