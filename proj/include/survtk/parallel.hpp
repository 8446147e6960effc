#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace survtk {

inline unsigned hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

// Runs fn(i) for i in [0, count) across up to n_threads workers.  Results must
// be written to per-index slots by the caller; iteration order must not matter
// for correctness (randomized work uses pre-derived substreams instead).
// The first exception thrown by any worker is rethrown on the calling thread.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         unsigned n_threads = 0) {
    if (count == 0) return;
    if (n_threads == 0) n_threads = hardware_threads();
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, count));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_threads - 1);
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace survtk
