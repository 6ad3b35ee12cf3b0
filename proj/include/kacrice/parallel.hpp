#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kacrice {

/// Upper bound on worker threads. Results never depend on it: work items are
/// indexed and every reduction happens afterwards in index order.
struct Workers {
    int threads = 1;

    static Workers hardware() {
        return Workers{static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))};
    }

    /// Calls body(i) for i in [0, n). The first exception thrown is rethrown.
    template <class Body>
    void for_each(std::size_t n, Body&& body) const {
        const std::size_t width = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
        if (width <= 1) {
            for (std::size_t i = 0; i < n; ++i) body(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto run = [&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        std::vector<std::jthread> pool;
        pool.reserve(width - 1);
        for (std::size_t t = 1; t < width; ++t) pool.emplace_back(run);
        run();
        pool.clear();
        if (failure) std::rethrow_exception(failure);
    }
};

}  // namespace kacrice
