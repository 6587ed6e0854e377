#ifndef MOC_PARALLEL_HPP
#define MOC_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace moc {

// Worker count for objective evaluation: hardware concurrency, capped by
// the MOCO_THREADS environment variable when set.
inline std::size_t evaluation_threads() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MOCO_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
        } catch (...) {
        }
    }
    return n;
}

// Runs fn(i) for i in [0, n). Each index is written by exactly one worker,
// so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(evaluation_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

} // namespace moc

#endif
