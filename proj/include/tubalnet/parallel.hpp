#pragma once

#include <cstddef>
#include <functional>

namespace tubalnet {

/// Thread cap for internal slice parallelism. Read once from TUBALNET_THREADS
/// (0 or unset = hardware concurrency) unless overridden.
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs body(i) for i in [0, count). Every index is handled by exactly one
/// thread and bodies write disjoint outputs, so results do not depend on the
/// thread count.
void parallel_for(std::size_t count, std::size_t work_per_item, const std::function<void(std::size_t)>& body);

}  // namespace tubalnet
