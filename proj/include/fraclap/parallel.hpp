#ifndef FRACLAP_PARALLEL_HPP
#define FRACLAP_PARALLEL_HPP

#include <algorithm>
#include <thread>
#include <vector>

namespace fraclap {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(worker, begin, end) on contiguous index blocks. The partition is a
// fixed function of (n, threads), so results that are merged in worker order
// are reproducible for a given thread count.
template <class Fn>
void parallel_blocks(long long n, int threads, Fn&& fn) {
    threads = static_cast<int>(std::max<long long>(1, std::min<long long>(threads, n == 0 ? 1 : n)));
    if (threads == 1) {
        fn(0, 0LL, n);
        return;
    }
    std::vector<std::thread> pool;
    const long long chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        const long long b = std::min<long long>(n, w * chunk);
        const long long e = std::min<long long>(n, b + chunk);
        pool.emplace_back([&, w, b, e] { fn(w, b, e); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace fraclap

#endif
