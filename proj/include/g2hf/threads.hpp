#ifndef G2HF_THREADS_HPP
#define G2HF_THREADS_HPP

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace g2hf {

// Worker count for the data-parallel kernels. 0 = auto (hardware concurrency).
// Resolution order: explicit set_threads() > G2HF_THREADS env var > auto.
inline int& thread_setting() {
    static int n = -1; // -1 = unset
    return n;
}

inline void set_threads(int n) { thread_setting() = n; }

inline int num_threads() {
    int n = thread_setting();
    if (n < 0) {
        if (const char* env = std::getenv("G2HF_THREADS")) n = std::atoi(env);
        else n = 0;
    }
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
}

// Splits [0,n) into contiguous chunks, one per worker. Each index is
// processed by exactly one worker, so per-element results are identical
// to the sequential loop.
inline void parallel_for(int n, const std::function<void(int, int)>& body) {
    int workers = num_threads();
    if (workers <= 1 || n < 2) {
        body(0, n);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int lo = w * chunk;
        int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

} // namespace g2hf

#endif
