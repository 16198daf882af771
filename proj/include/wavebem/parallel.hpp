#pragma once

#include <cstddef>
#include <functional>

namespace wavebem {

// Worker count: WAVEBEM_THREADS if set (>= 1), else hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() threads, in contiguous
// blocks. Bodies must write disjoint data; results are schedule independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wavebem
