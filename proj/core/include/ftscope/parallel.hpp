#pragma once

#include <cstddef>
#include <functional>

namespace ftscope {

/// Worker cap: FTSCOPE_THREADS when set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t thread_limit();

/// Runs fn(i) for i in [0, n) on up to thread_limit() threads. Every index runs
/// exactly once; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ftscope
