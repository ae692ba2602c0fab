#include "htlab/replicate.hpp"

#include <cmath>
#include <vector>

#include <omp.h>

namespace htlab {

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

SampleStats sample_stats(std::span<const double> xs) {
  SampleStats s;
  s.n = xs.size();
  if (s.n == 0) return s;
  s.mean = pairwise_sum(xs) / static_cast<double>(s.n);
  std::vector<double> dev(xs.size());
  // second pass removes the rounding of the first sum
  for (std::size_t k = 0; k < xs.size(); ++k) dev[k] = xs[k] - s.mean;
  s.mean += pairwise_sum(dev) / static_cast<double>(s.n);
  if (s.n < 2) return s;
  for (std::size_t k = 0; k < xs.size(); ++k) dev[k] = (xs[k] - s.mean) * (xs[k] - s.mean);
  s.sd = std::sqrt(pairwise_sum(dev) / static_cast<double>(s.n - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace htlab
