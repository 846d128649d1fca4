#pragma once

#include "crowdbp/assignment.hpp"
#include "crowdbp/population.hpp"
#include "crowdbp/types.hpp"

namespace crowdbp {

/// Fan-in of one weight update: delta = (s-1)(r-1).
inline Real fan_in(int r, int s) {
  return static_cast<Real>(s - 1) * static_cast<Real>(r - 1);
}

/// Crowd-level reliability moments: e_p = E p and phi = E (2p-1)^2.
/// Constructible from distribution parameters or empirically from a sampled
/// population; experiment reports state which was used.
struct CrowdMoments {
  Real e_p;
  Real phi;

  static CrowdMoments from_params(Real mean, Real variance);
  static CrowdMoments from_population(const RealVector& reliabilities);
};

struct MomentPrediction {
  Real mean;
  Real variance;
  int k;
  bool variance_is_bound;
};

/// Exact k=1 mean and variance of the raw edge weight, computed from the
/// actual graph's neighbor reliabilities (no large-r assumption). The
/// initial weights are i.i.d. with the given mean and variance.
MomentPrediction exact_first_moments(const Assignment& asg,
                                     const Population& pop, int user,
                                     int question, Real init_mean = 1.0,
                                     Real init_variance = 1.0);

/// Large-r k=1 moments:
///   mean     = (s-1)(r-1)(2 p_a - 1)(2 e_p - 1)
///   variance = (s-1)(r-1)[(2 - phi) + (1-(2 p_a -1)^2)(r-1)(2 e_p -1)^2]
MomentPrediction approx_first_moments(Real p_a, const CrowdMoments& crowd,
                                      int r, int s);

/// Meta-task-series mean at task k >= 1: (2 p_a - 1)(2 e_p - 1) phi^(k-1).
Real series_mean(Real p_a, const CrowdMoments& crowd, int k);

/// Meta-task-series variance upper bound at task k >= 1:
///   v0 delta^-k + r (2 e_p - 1)^2 delta^-1 (phi^2k - delta^-k)/(phi^2 - delta^-1)
/// with the removable singularity at phi^2 = delta^-1 replaced by its limit
///   v0 delta^-k + r (2 e_p - 1)^2 delta^-1 k phi^(2(k-1)).
Real series_variance_bound(Real v0, const CrowdMoments& crowd, int r, int s,
                           int k);

/// True iff delta^-1 <= phi^2 < 1 (the series relative error stays bounded).
bool convergence_condition(const CrowdMoments& crowd, int r, int s);

/// Limiting decision rule: sign of (2 e_p - 1) * sum_b A_ib (2 p_b - 1).
/// `answers_row` and `reliabilities_row` are aligned over the users of one
/// question. A zero sum yields 0, the same convention as decide().
int asymptotic_decision(const RealVector& answers_row,
                        const RealVector& reliabilities_row, Real e_p);

}  // namespace crowdbp
