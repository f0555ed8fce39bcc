#pragma once

#include <cstdint>
#include <functional>

namespace unigs {

// Worker count used by every parallel loop in the library. Zero or negative
// means "all logical cores".
void set_thread_count(int threads);
int thread_count();

// Runs body(i) for i in [0, n). Iterations must write disjoint outputs; the
// result never depends on how iterations are scheduled.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace unigs
