#ifndef CTDS_PARALLEL_HPP
#define CTDS_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "ctds/common.hpp"

namespace ctds {

// Thread count: CTDS_THREADS env var, default 1.
inline int thread_count() {
    if (const char* env = std::getenv("CTDS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n). The chunk
// partition does not depend on the thread count, so any per-chunk results
// combined in chunk order are reproducible regardless of parallelism.
template <class Fn>
void parallel_chunks(Index n, Index chunk_size, const Fn& fn, int threads = thread_count()) {
    const Index n_chunks = (n + chunk_size - 1) / chunk_size;
    if (threads <= 1 || n_chunks <= 1) {
        for (Index c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    const int k = std::min<Index>(threads, n_chunks);
    pool.reserve(k);
    for (int w = 0; w < k; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const Index c = next.fetch_add(1);
                if (c >= n_chunks) return;
                fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ctds

#endif  // CTDS_PARALLEL_HPP
