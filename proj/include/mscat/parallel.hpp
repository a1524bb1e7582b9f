#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mscat {

/// Run fn(i) for i in [0, n) on a static partition of worker threads.
/// Results must be written to independent slots; the first exception thrown
/// by any worker is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& fn, unsigned max_threads = 8) {
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned nt = std::min<unsigned>({max_threads, hw, static_cast<unsigned>(n)});
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) {
        workers.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) fn(i);
            } catch (...) {
                std::scoped_lock lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace mscat
