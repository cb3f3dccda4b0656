#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rwre {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace rwre
