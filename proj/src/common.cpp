#include "hrtpp/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace hrtpp {

std::string hex64(std::uint64_t value) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f,
                  unsigned num_threads) {
    if (n == 0) return;
    unsigned hw = num_threads != 0 ? num_threads : std::thread::hardware_concurrency();
    if (hw <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                f(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace hrtpp
