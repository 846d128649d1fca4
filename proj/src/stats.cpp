#include "crowdbp/stats.hpp"

#include <algorithm>
#include <limits>

namespace crowdbp {

SampleSummary summarize(const std::vector<Real>& sample) {
  SampleSummary out;
  out.n = static_cast<std::int64_t>(sample.size());
  if (out.n == 0) return out;

  Real sum = 0.0;
  for (Real x : sample) sum += x;
  out.mean = sum / static_cast<Real>(out.n);

  if (out.n < 2) return out;
  Real m2 = 0.0, m4 = 0.0;
  for (Real x : sample) {
    const Real d = x - out.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const Real n = static_cast<Real>(out.n);
  out.variance = m2 / (n - 1.0);
  out.se_mean = std::sqrt(out.variance / n);
  // Standard error of the sample variance via the fourth central moment.
  const Real m4_hat = m4 / n;
  const Real var_of_var =
      (m4_hat - (n - 3.0) / (n - 1.0) * out.variance * out.variance) / n;
  out.se_variance = var_of_var > 0.0 ? std::sqrt(var_of_var) : 0.0;
  return out;
}

Real quantile(std::vector<Real> sample, Real q) {
  if (sample.empty()) return std::numeric_limits<Real>::quiet_NaN();
  q = std::clamp(q, 0.0, 1.0);
  std::sort(sample.begin(), sample.end());
  const Real pos = q * static_cast<Real>(sample.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  const Real frac = pos - static_cast<Real>(lo);
  return sample[lo] * (1.0 - frac) + sample[hi] * frac;
}

}  // namespace crowdbp
