#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace osc {

/// Worker count resolution order: explicit argument > OSC_THREADS > cores.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("OSC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(begin, end) over a contiguous partition of [0, n).
/// Results must be combined by the caller in chunk order so that
/// reductions stay deterministic regardless of thread count.
template <class Body>
void parallel_chunks(std::int64_t n, int threads, Body&& body) {
    threads = std::max<int>(1, static_cast<int>(std::min<std::int64_t>(threads, n)));
    if (threads <= 1 || n <= 1) {
        if (n > 0) body(0, static_cast<std::int64_t>(0), n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::int64_t b = t * chunk;
        std::int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, t, b, e] { body(t, b, e); });
    }
    for (auto& th : pool) th.join();
}

/// Deterministic argmax reduction state: larger value wins, ties go to the
/// smaller index (first in enumeration order).
struct MaxWitness {
    double value = -1.0;
    std::int64_t index = -1;

    void offer(double v, std::int64_t i) {
        if (i < 0) return;
        if (index < 0 || v > value || (v == value && i < index)) {
            value = v;
            index = i;
        }
    }

    void merge(const MaxWitness& other) {
        if (other.index >= 0) offer(other.value, other.index);
    }
};

}  // namespace osc
