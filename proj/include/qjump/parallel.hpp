#pragma once

// Deterministic path-level parallelism: fn(i) must be a pure function of i
// writing only to slot i of preallocated storage. Work distribution is a
// shared atomic counter, which changes *scheduling* with the worker count but
// never the per-index results; reductions happen sequentially by index after
// the join, so outputs are bit-identical for any worker count.

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qjump {

inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err = nullptr;
    std::mutex err_mu;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace qjump
