#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace vpb {

// Number of worker threads used by parallel_for; 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Calls body(begin, end) on disjoint contiguous chunks of [0, n). Chunk
// boundaries depend only on n and the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Pairwise summation in fixed index order.
double pairwise_sum(std::span<const double> values);

}  // namespace vpb
