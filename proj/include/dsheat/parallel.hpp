#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace dsheat {

/// Worker count used when the caller passes 0.
inline int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(block) for block = 0..blocks-1 on up to `workers` threads.
///
/// Blocks are the unit of determinism: callers give each block its own output
/// slot and reduce the slots in block order afterwards, so results never
/// depend on the worker count. The first exception thrown by any block is
/// rethrown on the calling thread.
template <class F>
void for_each_block(std::size_t blocks, int workers, F&& fn) {
  if (workers <= 0) workers = default_workers();
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), blocks);
  if (nthreads <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(blocks);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Half-open replica range [begin, end) of block b when n replicas are split into `blocks` blocks.
inline std::pair<std::size_t, std::size_t> block_range(std::size_t n, std::size_t blocks, std::size_t b) {
  return {n * b / blocks, n * (b + 1) / blocks};
}

/// Running mean and sum of squared deviations (Welford), mergeable with Chan's rule.
struct RunningStat {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }

  void merge(const RunningStat& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
      *this = o;
      return;
    }
    const double n = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
  }

  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double stderr_of_mean() const { return count > 1.0 ? std::sqrt(variance() / count) : 0.0; }
};

}  // namespace dsheat
