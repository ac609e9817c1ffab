#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace divland {

inline unsigned default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n). Each index is processed exactly once; the
/// caller must make body(i) depend on i only, so results are identical for
/// any worker count. workers <= 1 runs sequentially on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock{error_mutex};
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };

    const auto count = static_cast<std::size_t>(workers) < n ? workers : static_cast<unsigned>(n);
    std::vector<std::jthread> pool;
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) {
        pool.emplace_back(worker);
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace divland
