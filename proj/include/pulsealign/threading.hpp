#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pulsealign {

// Minimal fixed-size worker pool. parallel_for splits [0, n) into contiguous
// chunks, one per worker, so every output element is written by exactly one
// thread and each partial reduction keeps a fixed accumulation order. Results
// are therefore bit-identical for any thread count.
class ThreadPool {
public:
    explicit ThreadPool(int threads) {
        threads = threads < 1 ? 1 : threads;
        for (int i = 0; i + 1 < threads; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // fn(begin, end) over disjoint chunks; runs on workers plus this thread.
    void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (n <= 0) return;
        const int parts = static_cast<int>(std::min<std::int64_t>(size(), n));
        if (parts == 1) {
            fn(0, n);
            return;
        }
        const std::int64_t chunk = (n + parts - 1) / parts;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            pending_ = 0;
            for (int p = 1; p < parts; ++p) {
                const std::int64_t begin = p * chunk;
                const std::int64_t end = std::min<std::int64_t>(n, begin + chunk);
                if (begin >= end) continue;
                tasks_.emplace_back([&fn, begin, end] { fn(begin, end); });
                ++pending_;
            }
        }
        cv_.notify_all();
        fn(0, std::min<std::int64_t>(chunk, n));
        std::unique_lock<std::mutex> lock(mutex_);
        done_cv_.wait(lock, [this] { return pending_ == 0 && tasks_.empty(); });
    }

private:
    void worker_loop() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
                if (stop_ && tasks_.empty()) return;
                task = std::move(tasks_.back());
                tasks_.pop_back();
            }
            task();
            {
                std::lock_guard<std::mutex> lock(mutex_);
                --pending_;
            }
            done_cv_.notify_one();
        }
    }

    std::vector<std::thread> workers_;
    std::vector<std::function<void()>> tasks_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    int pending_ = 0;
    bool stop_ = false;
};

// Process-wide pool used by the tensor ops. set_compute_threads(1) forces the
// fully serial mode; results do not depend on the setting either way.
ThreadPool& compute_pool();
void set_compute_threads(int threads);
int compute_threads();

template <typename Fn>
void parallel_chunks(std::int64_t n, Fn&& fn) {
    compute_pool().parallel_for(n, std::function<void(std::int64_t, std::int64_t)>(std::forward<Fn>(fn)));
}

} // namespace pulsealign
