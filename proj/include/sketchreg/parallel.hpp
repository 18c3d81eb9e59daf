#pragma once

#include <cstddef>
#include <functional>

// Worker-count control for block-parallel loops. Tasks always write disjoint
// outputs and never share an accumulator, so results do not depend on the
// number of threads.
namespace sketchreg::parallel {

void set_threads(std::size_t n);
std::size_t threads() noexcept;

/// Runs fn(0), ..., fn(tasks - 1), possibly concurrently. Rethrows the first
/// exception raised by any task.
void for_each_task(std::size_t tasks, const std::function<void(std::size_t)>& fn);

/// Splits [0, n) into contiguous chunks of `grain` and runs fn(begin, end) on each.
void for_each_range(std::size_t n, std::size_t grain,
                    const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace sketchreg::parallel
