#pragma once

#include <cstddef>
#include <functional>

namespace latomo {

/// Caps internal parallelism. Values < 1 are clamped to 1. Default is 1.
void set_num_threads(int n);
int num_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
/// share indices, so kernels that write only to their own indices are
/// bit-identical for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace latomo
