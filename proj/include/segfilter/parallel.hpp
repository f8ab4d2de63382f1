#pragma once

#include <cstddef>
#include <functional>

namespace segfilter {

// Runs fn(i) for every i in [0, count) across `workers` threads. Results
// must be written to per-index slots by the caller; after all threads join,
// the exception thrown by the lowest failing index (if any) is rethrown, so
// error reporting does not depend on scheduling.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace segfilter
