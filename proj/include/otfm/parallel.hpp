#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace otfm {

// Fork-join over contiguous shards [begin, end) of n items. Shard
// boundaries depend only on (n, workers), so any reduction done in shard
// order is reproducible for a fixed worker count. Exceptions propagate.
inline void parallel_shards(int n, int workers,
                            const std::function<void(int shard, int begin, int end)>& fn) {
    if (workers < 1) workers = 1;
    if (workers > n) workers = n < 1 ? 1 : n;
    if (workers == 1) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const int base = n / workers;
    const int extra = n % workers;
    int begin = 0;
    for (int w = 0; w < workers; ++w) {
        const int len = base + (w < extra ? 1 : 0);
        const int end = begin + len;
        threads.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace otfm
