#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace qhybrid {

inline std::size_t chunk_count(std::size_t n, int workers) {
    std::size_t n_chunks = workers > 1 ? static_cast<std::size_t>(workers) : 1;
    if (n_chunks > n) n_chunks = n == 0 ? 1 : n;
    return n_chunks;
}

// Static chunking over [0, n): fn(begin, end, chunk_index) per chunk.
// workers <= 1 runs inline. Chunk boundaries depend only on (n, workers),
// so runs with the same worker count are reproducible; bitwise results can
// still differ across worker counts when callers reduce per-chunk partials.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
    const std::size_t n_chunks = chunk_count(n, workers);
    if (n_chunks <= 1) {
        fn(std::size_t{0}, n, std::size_t{0});
        return;
    }
    const std::size_t base = n / n_chunks, extra = n % n_chunks;
    std::vector<std::thread> pool;
    pool.reserve(n_chunks);
    std::size_t begin = 0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        pool.emplace_back([&fn, begin, len, c] { fn(begin, begin + len, c); });
        begin += len;
    }
    for (auto& t : pool) t.join();
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    parallel_chunks(n, workers, [&fn](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace qhybrid
