#pragma once

#include <cstddef>
#include <functional>

namespace pirl {

// Worker count for kernel-internal parallelism. 1 = fully serial. Results are
// bit-identical for any setting: work items own disjoint outputs and every
// reduction runs in a fixed order within its item.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over a static partition of [0, total).
void parallel_for(std::size_t total, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace pirl
