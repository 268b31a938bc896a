#include "fkdl/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fkdl {

int default_workers() {
    const char* s = std::getenv("FKDL_WORKERS");
    if (!s || !*s) return 1;
    try {
        int w = std::stoi(s);
        return w < 1 ? 1 : w;
    } catch (...) {
        return 1;
    }
}

void parallel_for(int n, const std::function<void(int)>& f, int workers) {
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(workers, n); ++t)
        pool.emplace_back([&] {
            while (true) {
                int i = next++;
                if (i >= n) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace fkdl
