#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "crowdbp/types.hpp"

namespace crowdbp {

/// Streaming mean and sample variance (Welford update).
class RunningStats {
 public:
  void add(Real x) {
    ++n_;
    const Real d = x - mean_;
    mean_ += d / static_cast<Real>(n_);
    m2_ += d * (x - mean_);
  }

  std::int64_t count() const { return n_; }
  Real mean() const { return mean_; }
  Real variance() const {  // sample variance, n-1 denominator
    return n_ > 1 ? m2_ / static_cast<Real>(n_ - 1) : 0.0;
  }
  Real standard_error() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<Real>(n_)) : 0.0;
  }

 private:
  std::int64_t n_ = 0;
  Real mean_ = 0.0;
  Real m2_ = 0.0;
};

/// Two-pass sample summary, including standard errors of both the mean and
/// the variance estimate (the latter via the fourth central moment).
struct SampleSummary {
  std::int64_t n = 0;
  Real mean = 0.0;
  Real variance = 0.0;
  Real se_mean = 0.0;
  Real se_variance = 0.0;
};

SampleSummary summarize(const std::vector<Real>& sample);

/// Interpolated quantile of a sample; NaN when empty. q in [0,1].
Real quantile(std::vector<Real> sample, Real q);

}  // namespace crowdbp
