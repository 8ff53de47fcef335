#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fsdde {

inline std::size_t& worker_count() {
    static std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return n;
}

/// Runs body(i) for i in [0, n). Each index is processed exactly once and
/// writes only to its own output slot, so results are identical for any
/// worker count; reductions happen afterwards in index order.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace fsdde
