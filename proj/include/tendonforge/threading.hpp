#pragma once

#include <functional>

namespace tendonforge {

// Thread count resolution: explicit request (> 0) wins, then the
// TENDON_FORGE_THREADS environment variable, then hardware concurrency.
int resolve_threads(int requested);

// Runs fn(0..n-1) on up to `threads` workers. Work items must write to
// disjoint locations; the first exception thrown by any item is rethrown
// on the calling thread after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace tendonforge
