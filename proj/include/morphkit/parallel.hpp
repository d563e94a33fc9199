#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace morphkit {

/// Worker count: MORPHKIT_THREADS if set and positive, otherwise the logical core count.
inline unsigned worker_count() {
    if (const char* env = std::getenv("MORPHKIT_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is visited exactly once,
/// so writes keyed by index are order-independent. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 64) {
    const std::size_t workers = std::min<std::size_t>(worker_count(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace morphkit
