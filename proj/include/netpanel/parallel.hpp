#pragma once

#include <future>
#include <thread>
#include <vector>

namespace netpanel {

/// Calls fn(k) for k in [0, count) and returns the results in index order.
/// Work runs on worker threads when the machine has more than one core;
/// results do not depend on scheduling because every task owns its RNG.
template <class Fn>
auto parallel_map(std::size_t count, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out;
    out.reserve(count);
    if (count <= 1 || std::thread::hardware_concurrency() <= 1) {
        for (std::size_t k = 0; k < count; ++k) out.push_back(fn(k));
        return out;
    }
    std::vector<std::future<R>> futures;
    futures.reserve(count);
    for (std::size_t k = 0; k < count; ++k) futures.push_back(std::async(std::launch::async, fn, k));
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

}  // namespace netpanel
