#include "segfilter/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "segfilter/error.hpp"

namespace segfilter {

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers < 1) {
    raise(ErrorCode::InvalidConfig, "workers must be a positive integer");
  }
  if (count == 0) return;

  const std::size_t num_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (num_threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(num_threads);
  for (std::size_t t = 0; t < num_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& worker : pool) worker.join();

  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

}  // namespace segfilter
