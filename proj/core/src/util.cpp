#include "flowslam/util.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace flowslam {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index) {
    // FNV-1a over the stage name keeps streams for different stages apart
    // even when indices collide.
    uint64_t tag = 0xcbf29ce484222325ull;
    for (char c : stage) {
        tag ^= static_cast<unsigned char>(c);
        tag *= 0x100000001b3ull;
    }
    uint64_t state = master ^ tag;
    splitmix64(state);
    state ^= index * 0x9e3779b97f4a7c15ull;
    return splitmix64(state);
}

void parallel_for(size_t count, int thread_count,
                  const std::function<void(size_t)>& fn) {
    if (count == 0) return;
    const int workers = std::max(1, thread_count);
    if (workers == 1 || count == 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const size_t n = count;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&next, n, &fn] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace flowslam
