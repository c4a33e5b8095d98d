// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace bdris {

template <class R>
std::vector<R> parallel_map(int n, int workers, const std::function<R(int)>& f) {
    std::vector<R> out(static_cast<std::size_t>(std::max(n, 0)));
    if (n <= 0) return out;
    const int w = std::clamp(workers, 1, n);
    if (w == 1) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[static_cast<std::size_t>(i)] = f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int t = 0; t < w; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace bdris
