#pragma once

#include <cstddef>
#include <functional>

namespace ddm {

/// Worker count used by parallel loops. 0 means "use DDM_THREADS, else 1".
void set_num_threads(int n);
int num_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count; callers that write per-index
/// results and reduce serially afterwards get bitwise-identical output for any
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ddm
