#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace qbspde {

/// Worker count: QBSPDE_THREADS if set (clamped to [1, 64]), else hardware
/// concurrency.
int worker_count();

/// Runs fn(begin, end) over fixed-size blocks of [0, n). Blocks are assigned
/// to threads dynamically but the block layout itself never depends on the
/// worker count, so any per-block outputs combine identically for every
/// QBSPDE_THREADS setting.
void parallel_for_blocks(std::size_t n, std::size_t block_size,
                         const std::function<void(std::size_t, std::size_t)>& fn);

/// Deterministic parallel sum: per-block partials (block size fixed) are
/// accumulated in block order regardless of scheduling.
double parallel_sum(std::size_t n, std::size_t block_size,
                    const std::function<double(std::size_t, std::size_t)>& block_fn);

}  // namespace qbspde
