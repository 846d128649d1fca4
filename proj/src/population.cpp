#include "crowdbp/population.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace crowdbp {

namespace {

void validate_spec(const ReliabilitySpec& spec) {
  if (!(spec.variance >= 0.0)) {
    throw std::invalid_argument("reliability variance must be >= 0");
  }
  if (!(spec.mean >= 0.0 && spec.mean <= 1.0)) {
    throw std::invalid_argument("reliability mean must lie in [0,1]");
  }
  if (spec.resample_cap < 1) {
    throw std::invalid_argument("resample_cap must be >= 1");
  }
}

}  // namespace

RealVector sample_reliabilities(int n_users, const ReliabilitySpec& spec,
                                Seed seed) {
  if (n_users < 1) throw std::invalid_argument("n_users must be >= 1");
  validate_spec(spec);

  RealVector p(n_users);
  if (spec.variance == 0.0) {
    p.setConstant(spec.mean);
    return p;
  }

  Rng rng = make_rng(seed);
  std::normal_distribution<Real> normal(spec.mean, std::sqrt(spec.variance));
  for (int a = 0; a < n_users; ++a) {
    if (spec.clip_policy == ClipPolicy::clip) {
      p[a] = std::clamp(normal(rng), 0.0, 1.0);
    } else {
      bool accepted = false;
      for (int attempt = 0; attempt < spec.resample_cap; ++attempt) {
        const Real draw = normal(rng);
        if (draw >= 0.0 && draw <= 1.0) {
          p[a] = draw;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        throw std::runtime_error(
            "sample_reliabilities: resample cap (" +
            std::to_string(spec.resample_cap) +
            ") exhausted; the normal(mean=" + std::to_string(spec.mean) +
            ", var=" + std::to_string(spec.variance) +
            ") has too little mass in [0,1]");
      }
    }
  }
  return p;
}

IntVector sample_truth(int n_questions, TruthPolicy policy, Seed seed) {
  if (n_questions < 1) throw std::invalid_argument("n_questions must be >= 1");
  IntVector z(n_questions);
  if (policy == TruthPolicy::all_plus_one) {
    z.setConstant(1);
    return z;
  }
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < n_questions; ++i) z[i] = coin(rng) ? 1 : -1;
  return z;
}

Population sample_population(int n_users, int n_questions,
                             const ReliabilitySpec& spec, TruthPolicy policy,
                             Seed seed) {
  Population pop;
  pop.reliabilities =
      sample_reliabilities(n_users, spec, derive_seed(seed, stream::kReliability));
  pop.truth = sample_truth(n_questions, policy, derive_seed(seed, stream::kTruth));
  return pop;
}

AnswerMatrix sample_answers(const Assignment& asg, const Population& pop,
                            Seed seed) {
  if (pop.reliabilities.size() != asg.n_users()) {
    throw std::invalid_argument("sample_answers: population has " +
                                std::to_string(pop.reliabilities.size()) +
                                " reliabilities for " +
                                std::to_string(asg.n_users()) + " users");
  }
  if (pop.truth.size() != asg.n_questions()) {
    throw std::invalid_argument("sample_answers: population has " +
                                std::to_string(pop.truth.size()) +
                                " truths for " +
                                std::to_string(asg.n_questions()) + " questions");
  }

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  AnswerMatrix answers;
  answers.values.resize(asg.n_edges());
  for (int e = 0; e < asg.n_edges(); ++e) {
    const Edge edge = asg.edge(e);
    const Real p = pop.reliabilities[edge.user];
    const int z = pop.truth[edge.question];
    answers.values[e] = unit(rng) < p ? static_cast<Real>(z)
                                      : static_cast<Real>(-z);
  }
  return answers;
}

AnswerMoments answer_moments(Real p_a, int z_i) {
  if (!(p_a >= 0.0 && p_a <= 1.0)) {
    throw std::invalid_argument("answer_moments: p must lie in [0,1]");
  }
  if (z_i != 1 && z_i != -1) {
    throw std::invalid_argument("answer_moments: z must be -1 or +1");
  }
  return AnswerMoments{static_cast<Real>(z_i) * (2.0 * p_a - 1.0),
                       4.0 * p_a * (1.0 - p_a)};
}

}  // namespace crowdbp
