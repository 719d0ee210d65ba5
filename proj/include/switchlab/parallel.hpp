#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace switchlab {

/// Worker count used by parallel_for when none is given. 0 means one per
/// hardware thread.
inline std::atomic<int>& default_threads() {
    static std::atomic<int> n{0};
    return n;
}

inline int resolve_threads(int requested) {
    if (requested <= 0) requested = default_threads().load();
    if (requested <= 0) requested = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, requested);
}

/// Runs fn(i) for i in [0, n). Each index is handled by exactly one worker,
/// so writes to slot i of a preallocated buffer need no locking. The first
/// exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(long n, Fn&& fn, int threads = 0) {
    const int t = static_cast<int>(std::min<long>(resolve_threads(threads), std::max<long>(n, 1)));
    if (t == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int k = 1; k < t; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace switchlab
