#pragma once

#include <cstddef>
#include <functional>

namespace icl {

// Worker count used by parallel_for. Defaults to ICL_LAB_THREADS when set,
// otherwise 1.
int thread_count();
void set_thread_count(int threads);

// Runs body(i) for i in [0, n). Iterations are split into contiguous blocks;
// callers that reduce results must write into per-index slots and combine
// them afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace icl
