#pragma once
// Minimal fork-join over an index range. COUETTE_WAVES_THREADS caps the
// number of workers (default: hardware concurrency).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace couette {

inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COUETTE_WAVES_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) n = n > 0 ? std::min(n, v) : v;
    }
    return std::max(n, 1);
}

// Calls fn(i) for i in [0, n) on a small pool. Writes to disjoint slots
// give the same result for any worker count.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
    const int workers = std::min(worker_count(), std::max(n, 1));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (int i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace couette
