#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace prl {

// Runs work(i) for i in [0, count) on a pool of threads and hands every
// result to reduce(i, result) on the calling thread in ascending i. At most
// `window` results are in flight, which bounds memory.
template <class Work, class Reduce>
void ordered_parallel_for(std::size_t count, unsigned threads, Work&& work, Reduce&& reduce,
                          std::size_t window = 0) {
  using Result = decltype(work(std::size_t{}));
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) reduce(i, work(i));
    return;
  }
  if (window == 0) window = 4 * static_cast<std::size_t>(threads);

  std::mutex mu;
  std::condition_variable produced, consumed;
  std::map<std::size_t, Result> ready;
  std::size_t next_to_reduce = 0;
  std::atomic<std::size_t> next_index{0};
  std::atomic<bool> abort{false};
  std::exception_ptr worker_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next_index.fetch_add(1);
      if (i >= count) return;
      {
        std::unique_lock lock(mu);
        consumed.wait(lock, [&] { return abort.load() || i < next_to_reduce + window; });
      }
      if (abort.load()) return;
      try {
        Result r = work(i);
        std::lock_guard lock(mu);
        ready.emplace(i, std::move(r));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!worker_error) worker_error = std::current_exception();
        abort = true;
      }
      produced.notify_all();
      consumed.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);

  std::exception_ptr reduce_error;
  while (next_to_reduce < count) {
    std::optional<Result> item;
    {
      std::unique_lock lock(mu);
      produced.wait(lock, [&] { return abort.load() || ready.count(next_to_reduce) > 0; });
      if (abort.load()) break;
      auto node = ready.extract(next_to_reduce);
      item.emplace(std::move(node.mapped()));
    }
    try {
      reduce(next_to_reduce, std::move(*item));
    } catch (...) {
      reduce_error = std::current_exception();
      abort = true;
    }
    {
      std::lock_guard lock(mu);
      ++next_to_reduce;
    }
    consumed.notify_all();
    if (reduce_error) break;
  }
  abort = true;
  consumed.notify_all();
  produced.notify_all();
  for (auto& t : pool) t.join();
  if (reduce_error) std::rethrow_exception(reduce_error);
  if (worker_error) std::rethrow_exception(worker_error);
}

}  // namespace prl
