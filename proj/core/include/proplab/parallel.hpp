#pragma once

#include <cstddef>
#include <functional>

namespace proplab {

// Worker count for per-day fan-out: PROPLAB_THREADS when set, otherwise the
// hardware concurrency, never more than n_items.
std::size_t thread_budget(std::size_t n_items);

// Runs fn(i) for every i in [0, n). Callers write results into per-index
// slots they own, so reductions stay deterministic regardless of scheduling.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace proplab
