#include "sketchreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sketchreg::parallel {
namespace {

std::atomic<std::size_t> g_threads{1};

} // namespace

void set_threads(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }

std::size_t threads() noexcept { return g_threads.load(); }

void for_each_task(std::size_t tasks, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(threads(), tasks);
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks) return;
            try {
                fn(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

void for_each_range(std::size_t n, std::size_t grain,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    grain = std::max<std::size_t>(1, grain);
    const std::size_t chunks = (n + grain - 1) / grain;
    for_each_task(chunks, [&](std::size_t c) {
        const std::size_t begin = c * grain;
        fn(begin, std::min(n, begin + grain));
    });
}

} // namespace sketchreg::parallel
