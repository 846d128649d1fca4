#pragma once

#include "crowdbp/assignment.hpp"
#include "crowdbp/rng.hpp"
#include "crowdbp/types.hpp"

namespace crowdbp {

// How normal reliability draws are constrained to [0,1].
enum class ClipPolicy { clip, resample };

struct ReliabilitySpec {
  Real mean = 0.5;
  Real variance = 0.0;
  ClipPolicy clip_policy = ClipPolicy::clip;
  int resample_cap = 1000;  // per-draw retries before giving up
};

enum class TruthPolicy { all_plus_one, uniform };

/// Per-user reliabilities p_a and ground-truth answers z_i.
struct Population {
  RealVector reliabilities;  // p_a in [0,1], one per user
  IntVector truth;           // z_i in {-1,+1}, one per question
};

/// Realized answers on the edges of an Assignment, entries in {-1,+1},
/// stored in the assignment's canonical edge order.
struct AnswerMatrix {
  RealVector values;

  Real value(const Assignment& asg, int user, int question) const {
    return values[asg.edge_index(user, question)];
  }
};

/// n_users normal(mean, variance) draws constrained to [0,1] by the spec's
/// clip policy. Deterministic for a fixed seed.
RealVector sample_reliabilities(int n_users, const ReliabilitySpec& spec,
                                Seed seed);

IntVector sample_truth(int n_questions, TruthPolicy policy, Seed seed);

Population sample_population(int n_users, int n_questions,
                             const ReliabilitySpec& spec, TruthPolicy policy,
                             Seed seed);

/// Each edge (a,i) is independently set to z_i with probability p_a and to
/// -z_i otherwise. Deterministic for a fixed seed.
AnswerMatrix sample_answers(const Assignment& asg, const Population& pop,
                            Seed seed);

struct AnswerMoments {
  Real mean;      // z_i (2 p_a - 1)
  Real variance;  // 4 p_a (1 - p_a)
};

AnswerMoments answer_moments(Real p_a, int z_i);

}  // namespace crowdbp
