#include "ibmvs/parallel.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ibmvs {

void parallel_for(int begin, int end, int workers, const std::function<void(int)>& fn) {
  const int count = end - begin;
  if (count <= 0) return;
  const int threads = std::clamp(workers, 1, count);
  if (threads == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(count) * w / threads);
    const int hi = begin + static_cast<int>(static_cast<long long>(count) * (w + 1) / threads);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ibmvs
