#pragma once

#include "lrising/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lrising {

inline constexpr const char* kThreadsEnv = "LRISING_THREADS";

// The environment variable overrides the requested count; 0 means hardware concurrency.
inline int resolve_threads(int requested) {
    if (const char* env = std::getenv(kThreadsEnv); env && *env) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0 || v > 1024) throw ConfigError(std::string(kThreadsEnv) + " must be an integer in [0,1024]");
        requested = static_cast<int>(v);
    }
    if (requested < 0) throw ConfigError("thread count must be non-negative");
    if (requested == 0) requested = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return requested;
}

// Calls fn(i) for i in [0, count). Work items are claimed dynamically, so callers
// must write results by index and reduce them in index order afterwards.
template <class F>
void parallel_for(std::size_t count, int threads, F&& fn) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::size_t>(count, 1024))));
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Results of fn over [0, count), in index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, int threads, F&& fn) {
    std::vector<T> out(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

}  // namespace lrising
