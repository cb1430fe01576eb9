#include "parallax/thread_pool.hpp"

namespace parallax {

ThreadPool::ThreadPool(unsigned workers) : workers_(workers == 0 ? 1 : workers) {
  // The caller participates, so spawn one fewer thread.
  for (unsigned i = 1; i < workers_; ++i) threads_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadPool::drain() {
  // Called with mutex_ held; releases it around each task.
  std::unique_lock lock(mutex_, std::adopt_lock);
  while (next_ < job_size_) {
    const std::size_t i = next_++;
    const auto* fn = job_;
    lock.unlock();
    (*fn)(i);
    lock.lock();
    if (++finished_ == job_size_) done_.notify_all();
  }
  lock.release();
}

void ThreadPool::worker_loop() {
  std::size_t seen = 0;
  std::unique_lock lock(mutex_);
  for (;;) {
    wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
    if (stop_) return;
    seen = generation_;
    lock.release();  // drain() adopts the held mutex and returns with it held
    drain();
    lock = std::unique_lock(mutex_, std::adopt_lock);
  }
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads_.empty() || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::unique_lock lock(mutex_);
  job_ = &fn;
  job_size_ = n;
  next_ = 0;
  finished_ = 0;
  ++generation_;
  wake_.notify_all();
  lock.release();
  drain();
  lock = std::unique_lock(mutex_, std::adopt_lock);
  done_.wait(lock, [&] { return finished_ == job_size_; });
  job_ = nullptr;
  job_size_ = 0;
}

}  // namespace parallax
