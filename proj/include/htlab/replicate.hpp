#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <vector>

namespace htlab {

enum class Execution { Serial, Parallel };

/// Runs fn(k) for k in [0, n) and returns the results in index order. The
/// parallel path distributes indices over OpenMP threads; since every result
/// depends only on its index the two paths return identical vectors. The
/// exception of the lowest failing index is rethrown.
template <typename T, typename F>
std::vector<T> replicate(std::size_t n, F&& fn, Execution ex = Execution::Parallel) {
  std::vector<T> out(n);
  if (ex == Execution::Serial) {
    for (std::size_t k = 0; k < n; ++k) out[k] = fn(k);
    return out;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    try {
      out[idx] = fn(idx);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

/// Pairwise (cascade) summation; result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator
  double se = 0.0;  // sd / sqrt(n)
};

SampleStats sample_stats(std::span<const double> xs);

/// Number of OpenMP threads the parallel path would use.
int max_threads();

}  // namespace htlab
