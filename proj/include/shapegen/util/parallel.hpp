#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shapegen::util {

// Global worker count. 0 = use hardware concurrency. Results never depend on
// this: workers only ever write disjoint, preassigned slots.
inline int& thread_count_slot() {
    static int n = 0;
    return n;
}

inline void set_threads(int n) { thread_count_slot() = n < 0 ? 0 : n; }

inline int effective_threads() {
    int n = thread_count_slot();
    if (n > 0) return n;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {
inline bool& inside_worker() {
    thread_local bool flag = false;
    return flag;
}
} // namespace detail

// Runs body(i) for i in [0, n). Work items are claimed off an atomic counter;
// the first exception wins, stops the pool, and is rethrown on the caller.
// Nested calls degrade to serial loops instead of oversubscribing; results
// are identical either way because workers only fill preassigned slots.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    int nt = effective_threads();
    if (nt <= 1 || n <= 1 || detail::inside_worker()) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    if (static_cast<std::size_t>(nt) > n) nt = static_cast<int>(n);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        detail::inside_worker() = true;
        while (!stop.load(std::memory_order_relaxed)) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
                stop.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    detail::inside_worker() = false; // pool threads die with their flag; reset the caller's
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Deterministic pairwise tree sum; the result depends only on element order,
// not on how the elements were produced.
template <class T>
T tree_sum(std::vector<T> v) {
    if (v.empty()) return T{};
    std::size_t n = v.size();
    while (n > 1) {
        std::size_t h = 0;
        for (std::size_t i = 0; i + 1 < n; i += 2) v[h++] = v[i] + v[i + 1];
        if (n & 1) v[h++] = v[n - 1];
        n = h;
    }
    return v[0];
}

// Slot-wise tree sum over per-block partial vectors (all the same length,
// block order fixed by the caller).
template <class T>
std::vector<T> tree_sum_columns(const std::vector<std::vector<T>>& partials) {
    if (partials.empty()) return {};
    const std::size_t slots = partials.front().size();
    std::vector<T> out(slots);
    std::vector<T> column(partials.size());
    for (std::size_t j = 0; j < slots; ++j) {
        for (std::size_t b = 0; b < partials.size(); ++b) column[b] = partials[b][j];
        out[j] = tree_sum(column);
    }
    return out;
}

} // namespace shapegen::util
