#pragma once

#include <optional>
#include <vector>

#include "crowdbp/assignment.hpp"
#include "crowdbp/population.hpp"
#include "crowdbp/rng.hpp"
#include "crowdbp/types.hpp"

namespace crowdbp {

enum class Variant { raw, normalized, hard_decision, series };

/// Per-edge weights y_{a->i} at iteration k, defined on exactly the edges of
/// the governing Assignment (canonical edge order).
struct WeightState {
  RealVector weights;
  int iteration = 0;
  Variant variant = Variant::raw;
};

/// Per-question decisions in {-1, 0, +1}; 0 encodes an indeterminate
/// (exactly tied) weighted vote.
struct DecisionVector {
  IntVector values;
};

/// I.i.d. normal(mean, variance) weight per edge, iteration 0.
WeightState init_weights(const Assignment& asg, Seed seed, Real mean = 1.0,
                         Real variance = 1.0,
                         Variant variant = Variant::raw);

/// The double correlation sum for one edge:
///   sum over j in a's other questions of A_ja * sum over other users b of
///   A_jb * y_{b->j}.
/// Accumulation order is index-ascending over both sums for reproducibility.
Real correlation_sum(const Assignment& asg, const AnswerMatrix& answers,
                     const RealVector& weights, int user, int question);

/// One synchronous update of every edge weight via the correlation sum.
/// Linear in the weight state; input state is left unmodified.
WeightState kos_step(const WeightState& state, const AnswerMatrix& answers,
                     const Assignment& asg);

/// kos_step scaled by 1/((s-1)(r-1)). Maps [-1,1]-valued states into
/// [-1,1]-valued states. Accepts normalized and series variants.
WeightState normalized_step(const WeightState& state,
                            const AnswerMatrix& answers,
                            const Assignment& asg);

/// Hard-decision update: each weight becomes the fraction of a's other
/// questions where a agrees with the weighted majority of the other users.
/// Inner majority ties contribute 0 (neither agreement nor disagreement).
/// Outputs lie on the grid {0, 1/(s-1), ..., 1}.
WeightState hard_decision_step(const WeightState& state,
                               const AnswerMatrix& answers,
                               const Assignment& asg);

/// Weighted vote per question: sign of sum over b in the question's users of
/// A_ib * y_{b->i}; an exactly zero sum maps to 0.
DecisionVector decide(const AnswerMatrix& answers, const WeightState& state,
                      const Assignment& asg);

/// Fraction of questions decided incorrectly; indeterminate decisions count
/// as errors.
Real question_error_rate(const DecisionVector& decisions,
                         const IntVector& truth);

struct MetataskConfig {
  int n_questions = 100;
  int n_users = 100;
  int r = 10;
  int s = 10;
  int iterations = 15;
  Variant variant = Variant::raw;
  ReliabilitySpec reliability;
  TruthPolicy truth_policy = TruthPolicy::all_plus_one;
  Seed seed = 0;
  Real init_mean = 1.0;
  Real init_variance = 1.0;
  // Raw weights grow like ((s-1)(r-1))^k; the run records the first
  // iteration whose max |weight| exceeds this bound.
  Real magnitude_warn = 1e100;
};

struct TrajectoryPoint {
  WeightState state;
  DecisionVector decisions;
  Real error_rate;
};

/// K synchronous updates from `initial`, dispatching on its variant.
/// Returns K+1 points (k = 0 is the initial state with its decisions).
std::vector<TrajectoryPoint> run_iterations(const Assignment& asg,
                                            const AnswerMatrix& answers,
                                            const IntVector& truth,
                                            WeightState initial,
                                            int iterations);

struct MetataskRun {
  Assignment assignment;
  Population population;
  AnswerMatrix answers;
  std::vector<TrajectoryPoint> trajectory;  // k = 0..K
  std::optional<int> magnitude_warning_k;
};

MetataskRun run_single_metatask(const MetataskConfig& cfg);

// How weights cross from one meta-task's graph to the next (edges are
// resampled, so prior weights do not live on the new edges).
enum class CarryRule {
  user_mean,        // carry each user's mean edge weight to all new edges
  random_old_edge,  // carry a uniformly chosen old edge weight per new edge
};

struct SeriesConfig {
  int n_questions = 100;
  int n_users = 100;
  int r = 10;
  int s = 10;
  int metatasks = 8;
  ReliabilitySpec reliability;
  TruthPolicy truth_policy = TruthPolicy::all_plus_one;
  CarryRule carry = CarryRule::user_mean;
  Seed seed = 0;
  Real init_mean = 1.0;
  Real init_variance = 1.0;
};

struct SeriesPoint {
  Assignment assignment;
  AnswerMatrix answers;
  WeightState state;  // after this meta-task's single normalized update
  DecisionVector decisions;
  Real error_rate;
};

struct SeriesRun {
  Population population;
  std::vector<SeriesPoint> points;  // k = 1..K
};

/// A sequence of meta-tasks: each gets a fresh degree-regular assignment and
/// fresh answers, one normalized update consuming the previous meta-task's
/// weights via the carry rule, then a weighted-vote decision.
SeriesRun run_metatask_series(const SeriesConfig& cfg);

/// Same, but over a caller-supplied population (held fixed across the series'
/// replications by the harness).
SeriesRun run_metatask_series_with_population(const SeriesConfig& cfg,
                                              const Population& pop);

}  // namespace crowdbp
