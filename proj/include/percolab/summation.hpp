#pragma once

#include <cmath>
#include <cstddef>

namespace percolab {

// Neumaier compensated accumulator. Exhaustive enumerations add up to 2^24
// terms spanning many orders of magnitude; plain summation loses digits there.
class NeumaierSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(const double* xs, std::size_t n) {
  NeumaierSum acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(xs[i]);
  return acc.value();
}

}  // namespace percolab
