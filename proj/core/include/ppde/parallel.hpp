#pragma once

#include <cstddef>
#include <functional>

namespace ppde {

// Worker budget: the PPDE_THREADS environment variable when set (clamped to
// [1, 256]), otherwise the hardware concurrency.  Re-read on every call so a
// process can change it between runs.
unsigned thread_budget();

// Splits [0, count) into contiguous chunks and runs `body(begin, end)` on up
// to thread_budget() workers.  Bodies must write only to disjoint, caller
// preallocated slots; reductions stay sequential on the caller side, so
// results never depend on the number of workers.
void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ppde
