/// @file parallel.hpp
/// @brief Minimal node-range parallelism, capped by CALORICFLOW_THREADS.
#pragma once

#include <functional>

namespace caloricflow {

/// Worker count: CALORICFLOW_THREADS if set and positive, else hardware concurrency.
int thread_count();

/// Runs body(lo, hi) over disjoint chunks covering [begin, end).
void parallel_for(int begin, int end, const std::function<void(int, int)>& body);

}  // namespace caloricflow
