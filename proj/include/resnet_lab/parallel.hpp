#pragma once

#include <cstddef>
#include <functional>

namespace resnet_lab {

/// Worker count: RESNET_LAB_THREADS if set and positive, else hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, n). Work is split in contiguous static blocks so
/// each index is handled exactly once; callers write per-index results and
/// reduce them in index order, which keeps results independent of the
/// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace resnet_lab
