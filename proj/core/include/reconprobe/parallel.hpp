#pragma once

#include <cstddef>
#include <functional>

namespace reconprobe {

// Worker count: hardware concurrency, capped by RECONPROBE_THREADS when set.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Callers write results into slot i so output
// order never depends on scheduling. The first exception (lowest index) is
// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace reconprobe
