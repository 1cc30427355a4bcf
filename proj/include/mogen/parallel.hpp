#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mogen {

// Worker cap from MOGEN_THREADS; defaults to 1 so artifacts stay
// byte-reproducible without any environment setup.
inline size_t worker_count() {
    const char* env = std::getenv("MOGEN_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    if (v < 1) return 1;
    return static_cast<size_t>(v);
}

// Index-sharded parallel loop. Each index is processed exactly once and
// writes only to its own output slot, so results are identical for any
// worker count.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min(worker_count(), n == 0 ? size_t(1) : n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mogen
