#pragma once

#include <cstddef>
#include <functional>

namespace epsel {

/// Worker count: hardware concurrency capped by the EPSEL_THREADS environment variable.
unsigned worker_count();

/// Runs `body(i)` for i in [0, count) on up to `workers` threads. Each index runs
/// exactly once; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned workers = worker_count());

}  // namespace epsel
