#pragma once

#include <cstddef>
#include <functional>

namespace condsub {

/// Process-wide worker count used by `parallel_for`. Defaults to 1.
void set_jobs(unsigned jobs);
unsigned jobs();

/// Runs body(i) for i in [0, n). Work units must write only to their own
/// slot of a pre-sized output; callers reduce afterwards in index order, so
/// the worker count never changes results. Nested calls run serially. If
/// several units throw, the exception of the lowest index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace condsub
