#pragma once

#include <functional>

namespace ibmvs {

/// Runs fn(i) for every i in [begin, end) using up to `workers` threads.
/// Iterations are split into contiguous chunks; fn must only write state
/// owned by index i so results do not depend on the worker count.
void parallel_for(int begin, int end, int workers, const std::function<void(int)>& fn);

}  // namespace ibmvs
