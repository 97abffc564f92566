#include "meshfit/core.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace meshfit {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MESHFIT_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_chunks(int64_t n, int64_t chunk_size, int threads,
                     const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (chunk_size <= 0) chunk_size = 1;
    const int64_t num_chunks = (n + chunk_size - 1) / chunk_size;
    threads = std::max(1, threads);
    if (threads == 1 || num_chunks == 1) {
        for (int64_t c = 0; c < num_chunks; ++c)
            fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            int64_t c = next.fetch_add(1);
            if (c >= num_chunks) break;
            fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    int nw = static_cast<int>(std::min<int64_t>(threads, num_chunks));
    pool.reserve(nw - 1);
    for (int t = 1; t < nw; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

void parallel_workers(int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1) {
        fn(0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back([&fn, t]() { fn(t); });
    fn(0);
    for (auto& t : pool) t.join();
}

}  // namespace meshfit
