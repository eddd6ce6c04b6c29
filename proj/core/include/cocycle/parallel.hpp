#pragma once

#include <cstddef>
#include <functional>

namespace cocycle {

/// Worker count: COCYCLE_LAB_WORKERS if set and positive, else `fallback`
/// if positive, else std::thread::hardware_concurrency().
std::size_t resolve_workers(std::size_t fallback = 0);

/// Runs body(task) for every task in [0, count) on up to `workers` threads.
///
/// Tasks are claimed dynamically, so callers must write results into
/// task-indexed slots and reduce them afterwards in index order. The first
/// exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace cocycle
