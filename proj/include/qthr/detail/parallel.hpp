#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qthr::detail {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end) on contiguous static blocks of [0, n). The first
/// exception thrown by any worker is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const std::size_t nt = std::min<std::size_t>(std::max(1, resolve_threads(threads)), std::max<std::size_t>(n, 1));
    if (nt <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (std::size_t w = 0; w < nt; ++w) {
        const std::size_t b = n * w / nt, e = n * (w + 1) / nt;
        pool.emplace_back([&, b, e] {
            try {
                fn(b, e);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

} // namespace qthr::detail
