#include "oarl/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace oarl {

size_t worker_count() {
    static size_t cached = [] {
        if (const char* env = std::getenv("OARL_THREADS")) {
            long v = std::atol(env);
            if (v >= 1) return static_cast<size_t>(v);
        }
        unsigned hc = std::thread::hardware_concurrency();
        return static_cast<size_t>(hc == 0 ? 1 : hc);
    }();
    return cached;
}

void parallel_for_chunks(size_t n, size_t chunk_size, const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    const size_t workers = worker_count();

    if (workers <= 1 || n_chunks <= 1) {
        for (size_t c = 0; c < n_chunks; ++c) {
            size_t b = c * chunk_size;
            fn(b, std::min(b + chunk_size, n));
        }
        return;
    }

    std::atomic<size_t> next{0};
    auto work = [&] {
        for (;;) {
            size_t c = next.fetch_add(1);
            if (c >= n_chunks) break;
            size_t b = c * chunk_size;
            fn(b, std::min(b + chunk_size, n));
        }
    };
    std::vector<std::thread> pool;
    size_t spawn = std::min(workers, n_chunks) - 1;
    pool.reserve(spawn);
    for (size_t i = 0; i < spawn; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
}

}  // namespace oarl
