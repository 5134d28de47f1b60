#include "pulsealign/threading.hpp"

#include <memory>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pulsealign {

namespace {
std::unique_ptr<ThreadPool> g_pool;
std::mutex g_pool_mutex;

// Large activation tensors churn every training step; keeping them on the
// heap instead of per-allocation mmap avoids refaulting the pages each time.
void tune_allocator_once() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        return true;
    }();
    (void)done;
#endif
}

} // namespace

ThreadPool& compute_pool() {
    std::lock_guard<std::mutex> lock(g_pool_mutex);
    if (!g_pool) {
        tune_allocator_once();
        const unsigned hw = std::thread::hardware_concurrency();
        g_pool = std::make_unique<ThreadPool>(hw == 0 ? 1 : static_cast<int>(hw));
    }
    return *g_pool;
}

void set_compute_threads(int threads) {
    std::lock_guard<std::mutex> lock(g_pool_mutex);
    tune_allocator_once();
    g_pool = std::make_unique<ThreadPool>(threads);
}

int compute_threads() { return compute_pool().size(); }

} // namespace pulsealign
