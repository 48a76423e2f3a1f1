#include "tubalnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace tubalnet {

namespace {

// Below this many flops per call the thread start-up cost dominates.
constexpr std::size_t kMinParallelWork = 1u << 18;

std::size_t threads_from_env() {
    std::size_t n = 0;
    if (const char* env = std::getenv("TUBALNET_THREADS")) {
        try {
            n = static_cast<std::size_t>(std::stoul(env));
        } catch (...) {
            n = 0;
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

std::atomic<std::size_t>& thread_cap() {
    static std::atomic<std::size_t> cap{threads_from_env()};
    return cap;
}

}  // namespace

std::size_t max_threads() { return thread_cap().load(); }

void set_max_threads(std::size_t n) {
    thread_cap().store(n == 0 ? std::max(1u, std::thread::hardware_concurrency()) : n);
}

void parallel_for(std::size_t count, std::size_t work_per_item,
                  const std::function<void(std::size_t)>& body) {
    const std::size_t threads = std::min(max_threads(), count);
    if (threads <= 1 || count * work_per_item < kMinParallelWork) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) body(i);
        });
    }
}

}  // namespace tubalnet
