#include "qbspde/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace qbspde {

int worker_count() {
    if (const char* env = std::getenv("QBSPDE_THREADS")) {
        int n = std::atoi(env);
        if (n < 1) n = 1;
        if (n > 64) n = 64;
        return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for_blocks(std::size_t n, std::size_t block_size,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    const int workers = worker_count();

    if (workers == 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t begin = b * block_size;
            fn(begin, std::min(n, begin + block_size));
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            const std::size_t begin = b * block_size;
            fn(begin, std::min(n, begin + block_size));
        }
    };
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<std::size_t>(workers, n_blocks));
    pool.reserve(spawn - 1);
    for (int i = 1; i < spawn; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
}

double parallel_sum(std::size_t n, std::size_t block_size,
                    const std::function<double(std::size_t, std::size_t)>& block_fn) {
    if (n == 0) return 0.0;
    if (block_size == 0) block_size = 1;
    const std::size_t n_blocks = (n + block_size - 1) / block_size;
    std::vector<double> partial(n_blocks, 0.0);
    parallel_for_blocks(n, block_size, [&](std::size_t begin, std::size_t end) {
        partial[begin / block_size] = block_fn(begin, end);
    });
    double total = 0.0;
    for (double v : partial) total += v;  // fixed order
    return total;
}

}  // namespace qbspde
