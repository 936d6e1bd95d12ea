#ifndef XSHIFT_PARALLEL_HPP_
#define XSHIFT_PARALLEL_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace xshift {

/// Calls fn(i) for every i in [0, n), split into contiguous blocks over
/// `threads` workers. Each index is handled by exactly one call, so any result
/// written per index is independent of the thread count. threads <= 0 uses
/// the hardware concurrency.
template <class Fn>
void parallel_for(Eigen::Index n, int threads, Fn&& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(threads, std::max<Eigen::Index>(n, 1)));
  if (workers <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Eigen::Index block = (n + workers - 1) / workers;
  for (Eigen::Index w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * block;
    const Eigen::Index end = std::min(n, begin + block);
    pool.emplace_back([&, begin, end] {
      try {
        for (Eigen::Index i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace xshift

#endif  // XSHIFT_PARALLEL_HPP_
