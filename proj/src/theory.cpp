#include "crowdbp/theory.hpp"

#include <cmath>
#include <stdexcept>

namespace crowdbp {

CrowdMoments CrowdMoments::from_params(Real mean, Real variance) {
  if (!(mean >= 0.0 && mean <= 1.0)) {
    throw std::invalid_argument("CrowdMoments: mean must lie in [0,1]");
  }
  if (!(variance >= 0.0)) {
    throw std::invalid_argument("CrowdMoments: variance must be >= 0");
  }
  const Real centered = 2.0 * mean - 1.0;
  const Real phi = 4.0 * variance + centered * centered;
  if (phi > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "CrowdMoments: E(2p-1)^2 > 1; no distribution on [0,1] has these moments");
  }
  return CrowdMoments{mean, std::min(phi, 1.0)};
}

CrowdMoments CrowdMoments::from_population(const RealVector& reliabilities) {
  if (reliabilities.size() < 1) {
    throw std::invalid_argument("CrowdMoments: empty population");
  }
  const Real e_p = reliabilities.mean();
  const RealVector centered = 2.0 * reliabilities.array() - 1.0;
  const Real phi = centered.array().square().mean();
  return CrowdMoments{e_p, phi};
}

MomentPrediction exact_first_moments(const Assignment& asg,
                                     const Population& pop, int user,
                                     int question, Real init_mean,
                                     Real init_variance) {
  if (!asg.has_edge(user, question)) {
    throw std::invalid_argument("exact_first_moments: not an edge");
  }
  if (pop.reliabilities.size() != asg.n_users()) {
    throw std::invalid_argument("exact_first_moments: population size mismatch");
  }
  const Real second_moment = init_variance + init_mean * init_mean;
  const Real x_a = 2.0 * pop.reliabilities[user] - 1.0;

  Real mean_sum = 0.0;
  Real variance = 0.0;
  for (int j : asg.questions_of(user)) {
    if (j == question) continue;
    Real inner_mean = 0.0;
    Real inner_var = 0.0;
    for (int b : asg.users_of(j)) {
      if (b == user) continue;
      const Real x_b = 2.0 * pop.reliabilities[b] - 1.0;
      inner_mean += x_b;
      // var(A y0) = E y0^2 - (2p_b-1)^2 (E y0)^2, independent across terms.
      inner_var += second_moment - x_b * x_b * init_mean * init_mean;
    }
    mean_sum += inner_mean;
    const Real weighted = inner_mean * init_mean;
    variance += inner_var + (1.0 - x_a * x_a) * weighted * weighted;
  }
  return MomentPrediction{x_a * mean_sum * init_mean, variance, 1, false};
}

MomentPrediction approx_first_moments(Real p_a, const CrowdMoments& crowd,
                                      int r, int s) {
  if (r < 2 || s < 2) {
    throw std::invalid_argument("approx_first_moments: r and s must be >= 2");
  }
  const Real delta = fan_in(r, s);
  const Real x_a = 2.0 * p_a - 1.0;
  const Real c = 2.0 * crowd.e_p - 1.0;
  const Real mean = delta * x_a * c;
  const Real variance =
      delta * ((2.0 - crowd.phi) +
               (1.0 - x_a * x_a) * static_cast<Real>(r - 1) * c * c);
  return MomentPrediction{mean, variance, 1, false};
}

Real series_mean(Real p_a, const CrowdMoments& crowd, int k) {
  if (k < 1) throw std::invalid_argument("series_mean: k must be >= 1");
  const Real c = 2.0 * crowd.e_p - 1.0;
  return (2.0 * p_a - 1.0) * c * std::pow(crowd.phi, k - 1);
}

Real series_variance_bound(Real v0, const CrowdMoments& crowd, int r, int s,
                           int k) {
  if (k < 1) throw std::invalid_argument("series_variance_bound: k must be >= 1");
  if (r < 2 || s < 2) {
    throw std::invalid_argument("series_variance_bound: r and s must be >= 2");
  }
  if (!(v0 >= 0.0)) {
    throw std::invalid_argument("series_variance_bound: v0 must be >= 0");
  }
  const Real delta_inv = 1.0 / fan_in(r, s);
  const Real c = 2.0 * crowd.e_p - 1.0;
  const Real phi_sq = crowd.phi * crowd.phi;
  const Real head = v0 * std::pow(delta_inv, k);
  if (std::abs(phi_sq - delta_inv) <= 1e-12) {
    // Removable singularity of the geometric sum.
    return head + static_cast<Real>(r) * c * c * delta_inv *
                      static_cast<Real>(k) * std::pow(crowd.phi, 2 * (k - 1));
  }
  return head + static_cast<Real>(r) * c * c * delta_inv *
                    (std::pow(crowd.phi, 2 * k) - std::pow(delta_inv, k)) /
                    (phi_sq - delta_inv);
}

bool convergence_condition(const CrowdMoments& crowd, int r, int s) {
  if (r < 2 || s < 2) {
    throw std::invalid_argument("convergence_condition: r and s must be >= 2");
  }
  const Real phi_sq = crowd.phi * crowd.phi;
  return 1.0 / fan_in(r, s) <= phi_sq && phi_sq < 1.0;
}

int asymptotic_decision(const RealVector& answers_row,
                        const RealVector& reliabilities_row, Real e_p) {
  if (answers_row.size() != reliabilities_row.size()) {
    throw std::invalid_argument("asymptotic_decision: row length mismatch");
  }
  Real sum = 0.0;
  for (int t = 0; t < answers_row.size(); ++t) {
    sum += answers_row[t] * (2.0 * reliabilities_row[t] - 1.0);
  }
  return sign_of((2.0 * e_p - 1.0) * sum);
}

}  // namespace crowdbp
