#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace minball {

// Worker count: hardware concurrency, capped by the MINBALL_THREADS env var.
inline int thread_count() {
    static const int n = [] {
        int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (hw < 1) hw = 1;
        if (const char* env = std::getenv("MINBALL_THREADS")) {
            const int cap = std::atoi(env);
            if (cap >= 1) hw = std::min(hw, cap);
        }
        return hw;
    }();
    return n;
}

// Data-parallel map over [0, n). The body must only write to per-index slots;
// reductions happen sequentially afterwards so results are independent of the
// thread count and schedule.
template <typename F>
void parallel_for(std::int64_t n, F&& body, std::int64_t grain = 1024) {
    const int workers = thread_count();
    if (n <= 0) return;
    if (workers == 1 || n <= grain) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::int64_t chunk = std::max<std::int64_t>(grain, n / (4 * workers));
    std::atomic<std::int64_t> next{0};
    auto run = [&] {
        for (;;) {
            const std::int64_t begin = next.fetch_add(chunk);
            if (begin >= n) break;
            const std::int64_t end = std::min(begin + chunk, n);
            for (std::int64_t i = begin; i < end; ++i) body(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

}  // namespace minball
