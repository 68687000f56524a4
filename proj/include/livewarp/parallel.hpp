// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace livewarp {

/// Fixed set of worker threads running indexed jobs. run(n, fn) calls fn(i)
/// for i in [0, n) and returns once all calls are done. With one thread the
/// calls happen inline, in order.
class WorkerPool {
public:
    explicit WorkerPool(unsigned threads = 0) {
        if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
        size_ = threads;
        for (unsigned i = 1; i < threads; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        wake_.notify_all();
        for (auto& t : workers_) t.join();
    }

    unsigned size() const { return size_; }

    void run(std::size_t n, const std::function<void(std::size_t)>& fn) {
        if (n == 0) return;
        if (workers_.empty() || n == 1) {
            for (std::size_t i = 0; i < n; ++i) fn(i);
            return;
        }
        {
            std::lock_guard lock(mutex_);
            job_ = &fn;
            next_ = 0;
            total_ = n;
            pending_ = n;
            error_ = nullptr;
            ++epoch_;
        }
        wake_.notify_all();
        drain();
        std::unique_lock lock(mutex_);
        done_.wait(lock, [this] { return pending_ == 0; });
        job_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

private:
    void drain() {
        for (;;) {
            std::size_t i;
            const std::function<void(std::size_t)>* job;
            {
                std::lock_guard lock(mutex_);
                if (!job_ || next_ >= total_) return;
                i = next_++;
                job = job_;
            }
            try {
                (*job)(i);
            } catch (...) {
                std::lock_guard lock(mutex_);
                if (!error_) error_ = std::current_exception();
            }
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) done_.notify_all();
        }
    }

    void worker_loop() {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
            }
            drain();
        }
    }

    unsigned size_ = 1;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t next_ = 0;
    std::size_t total_ = 0;
    std::size_t pending_ = 0;
    std::size_t epoch_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

}  // namespace livewarp
