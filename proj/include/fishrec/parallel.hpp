#pragma once

#include <cstddef>
#include <functional>

namespace fishrec {

// Runs fn(i) for every i in [0, n) on up to `workers` threads (0 = hardware
// concurrency). Callers must write results to disjoint, pre-allocated slots;
// with that discipline output is identical regardless of scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace fishrec
