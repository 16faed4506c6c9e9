#pragma once

#include <cmath>
#include <span>

namespace drate {

/// Neumaier's variant of Kahan summation. Order-dependent, so callers
/// feed terms in a fixed order to keep results reproducible.
class CompensatedSum {
 public:
  void add(double term) noexcept {
    const double t = sum_ + term;
    if (std::abs(sum_) >= std::abs(term)) {
      compensation_ += (sum_ - t) + term;
    } else {
      compensation_ += (term - t) + sum_;
    }
    sum_ = t;
  }

  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_mean(std::span<const double> values) {
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  return values.empty() ? 0.0 : sum.value() / static_cast<double>(values.size());
}

/// Sample standard deviation with divisor (n - 1); 0 for n < 2.
inline double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = compensated_mean(values);
  CompensatedSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  return std::sqrt(ss.value() / static_cast<double>(values.size() - 1));
}

/// exp(t) / (1 + exp(t)) without overflow for large |t|.
inline double logistic(double t) noexcept {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace drate
