#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "percolab/parallel.hpp"
#include "percolab/summation.hpp"

namespace percolab {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // binomial or sample standard error of the mean
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
};

inline double binomial_se(double mean, std::uint64_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(mean * (1.0 - mean) / static_cast<double>(n));
}

// Frequency of a boolean statistic over n independent replicas. The count is
// an integer, so the result does not depend on the worker count.
template <class Pred>
Estimate estimate_indicator(std::uint64_t n, std::uint64_t seed, int workers, Pred&& pred) {
  std::vector<std::uint8_t> hit(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) { hit[i] = pred(i, rng) ? 1 : 0; });
  std::uint64_t count = 0;
  for (std::uint8_t h : hit) count += h;
  Estimate est;
  est.mean = n ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
  est.se = binomial_se(est.mean, n);
  est.n = n;
  est.seed = seed;
  return est;
}

// Mean of an integer-valued statistic; sums of values and squares stay exact
// in 64-bit, so reductions are order-free.
template <class Fn>
Estimate estimate_integer_mean(std::uint64_t n, std::uint64_t seed, int workers, Fn&& fn) {
  std::vector<std::int64_t> value(n, 0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) { value[i] = fn(i, rng); });
  std::int64_t sum = 0;
  std::int64_t sum_sq = 0;
  for (std::int64_t v : value) {
    sum += v;
    sum_sq += v * v;
  }
  Estimate est;
  est.n = n;
  est.seed = seed;
  if (n == 0) return est;
  double mean = static_cast<double>(sum) / static_cast<double>(n);
  double var = static_cast<double>(sum_sq) / static_cast<double>(n) - mean * mean;
  if (var < 0.0) var = 0.0;
  est.mean = mean;
  est.se = std::sqrt(var / static_cast<double>(n));
  return est;
}

// Mean of a real-valued statistic. Per-replica values land in slots and are
// reduced with compensated summation in replica order.
template <class Fn>
Estimate estimate_real_mean(std::uint64_t n, std::uint64_t seed, int workers, Fn&& fn) {
  std::vector<double> value(n, 0.0);
  for_each_replica(n, seed, workers, [&](std::uint64_t i, Rng& rng) { value[i] = fn(i, rng); });
  NeumaierSum sum;
  NeumaierSum sum_sq;
  for (double v : value) {
    sum.add(v);
    sum_sq.add(v * v);
  }
  Estimate est;
  est.n = n;
  est.seed = seed;
  if (n == 0) return est;
  double mean = sum.value() / static_cast<double>(n);
  double var = sum_sq.value() / static_cast<double>(n) - mean * mean;
  if (var < 0.0) var = 0.0;
  est.mean = mean;
  est.se = std::sqrt(var / static_cast<double>(n));
  return est;
}

}  // namespace percolab
