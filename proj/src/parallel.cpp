#include "caloricflow/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace caloricflow {

int thread_count() {
  static const int count = [] {
    if (const char* env = std::getenv("CALORICFLOW_THREADS")) {
      try {
        const int v = std::stoi(env);
        if (v > 0) return v;
      } catch (...) {
      }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }();
  return count;
}

void parallel_for(int begin, int end, const std::function<void(int, int)>& body) {
  const int total = end - begin;
  if (total <= 0) return;
  constexpr int kMinChunk = 4096;
  const int workers = std::min(thread_count(), std::max(1, total / kMinChunk));
  if (workers <= 1) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (total + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo < hi) pool.emplace_back(body, lo, hi);
  }
  body(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
}

}  // namespace caloricflow
