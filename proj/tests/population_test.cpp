#include <cmath>
#include <vector>

#include <doctest.h>

#include "crowdbp/population.hpp"
#include "crowdbp/stats.hpp"
#include "crowdbp/theory.hpp"

using namespace crowdbp;

TEST_CASE("sample_reliabilities: zero variance is the degenerate distribution") {
  ReliabilitySpec spec;
  spec.mean = 0.5;
  spec.variance = 0.0;
  const RealVector p = sample_reliabilities(100, spec, 1);
  for (int a = 0; a < p.size(); ++a) CHECK(p[a] == 0.5);
}

TEST_CASE("sample_reliabilities: sample mean concentrates around the spec mean") {
  ReliabilitySpec spec;
  spec.mean = 0.7;
  spec.variance = 0.01;
  // Law of large numbers on the implemented sampler: each batch mean of 100
  // draws lies within 3*sqrt(0.01/100) of 0.7 with probability ~0.997.
  const Real tolerance = 3.0 * std::sqrt(0.01 / 100.0);
  int inside = 0;
  const int batches = 50;
  for (Seed seed = 0; seed < batches; ++seed) {
    const RealVector p = sample_reliabilities(100, spec, seed);
    if (std::abs(p.mean() - 0.7) <= tolerance) ++inside;
  }
  CHECK(inside >= 47);  // ~0.15 expected misses among 50 batches
}

TEST_CASE("sample_reliabilities: values stay in [0,1] under both policies") {
  ReliabilitySpec spec;
  spec.mean = 0.85;
  spec.variance = 0.05;
  const RealVector clipped = sample_reliabilities(2000, spec, 3);
  CHECK(clipped.minCoeff() >= 0.0);
  CHECK(clipped.maxCoeff() <= 1.0);

  spec.clip_policy = ClipPolicy::resample;
  const RealVector resampled = sample_reliabilities(2000, spec, 3);
  CHECK(resampled.minCoeff() >= 0.0);
  CHECK(resampled.maxCoeff() <= 1.0);
  // Resampling never produces the boundary atoms clipping creates.
  for (int a = 0; a < resampled.size(); ++a) {
    CHECK(resampled[a] != 0.0);
    CHECK(resampled[a] != 1.0);
  }
}

TEST_CASE("sample_reliabilities: resample cap aborts for hopeless specs") {
  ReliabilitySpec spec;
  spec.mean = 1.0;
  spec.variance = 1e6;  // essentially no mass in [0,1]
  spec.clip_policy = ClipPolicy::resample;
  spec.resample_cap = 50;
  CHECK_THROWS_AS(sample_reliabilities(10, spec, 1), std::runtime_error);
}

TEST_CASE("sample_reliabilities: invalid specs rejected") {
  ReliabilitySpec spec;
  spec.variance = -1.0;
  CHECK_THROWS_AS(sample_reliabilities(10, spec, 1), std::invalid_argument);
  spec.variance = 0.1;
  spec.mean = 1.5;
  CHECK_THROWS_AS(sample_reliabilities(10, spec, 1), std::invalid_argument);
  spec.mean = 0.5;
  CHECK_THROWS_AS(sample_reliabilities(0, spec, 1), std::invalid_argument);
}

TEST_CASE("unreliable-crowd regime: moments reproduce [E(2p-1)^2]^2 = 0.008") {
  // mean 0.5 and the variance derived from the squared second moment.
  const Real phi = std::sqrt(0.008);
  const CrowdMoments crowd = CrowdMoments::from_params(0.5, phi / 4.0);
  CHECK(crowd.phi * crowd.phi == doctest::Approx(0.008).epsilon(1e-12));
  CHECK_FALSE(convergence_condition(crowd, 10, 10));  // 0.008 < 1/81
}

TEST_CASE("sample_truth policies") {
  const IntVector plus = sample_truth(50, TruthPolicy::all_plus_one, 9);
  for (int i = 0; i < plus.size(); ++i) CHECK(plus[i] == 1);

  const IntVector mixed = sample_truth(2000, TruthPolicy::uniform, 9);
  int positives = 0;
  for (int i = 0; i < mixed.size(); ++i) {
    CHECK((mixed[i] == 1 || mixed[i] == -1));
    if (mixed[i] == 1) ++positives;
  }
  CHECK(positives > 800);
  CHECK(positives < 1200);
}

TEST_CASE("sample_answers: perfect and perfectly wrong users") {
  const Assignment asg = degree_regular_assignment(6, 6, 2, 2, 4);
  Population pop;
  pop.truth = sample_truth(6, TruthPolicy::uniform, 5);

  pop.reliabilities = RealVector::Constant(6, 1.0);
  const AnswerMatrix perfect = sample_answers(asg, pop, 6);
  for (int e = 0; e < asg.n_edges(); ++e) {
    CHECK(perfect.values[e] == static_cast<Real>(pop.truth[asg.edge(e).question]));
  }

  pop.reliabilities = RealVector::Constant(6, 0.0);
  const AnswerMatrix wrong = sample_answers(asg, pop, 6);
  for (int e = 0; e < asg.n_edges(); ++e) {
    CHECK(wrong.values[e] == static_cast<Real>(-pop.truth[asg.edge(e).question]));
  }
}

TEST_CASE("sample_answers: agreement rate concentrates for one busy user") {
  // One user answering 10000 questions; binomial concentration at p = 0.8.
  const int n_questions = 10000;
  std::vector<std::vector<int>> users(n_questions, std::vector<int>{0});
  const Assignment asg(n_questions, 1, std::move(users));
  Population pop;
  pop.reliabilities = RealVector::Constant(1, 0.8);
  pop.truth = sample_truth(n_questions, TruthPolicy::all_plus_one, 1);
  const AnswerMatrix answers = sample_answers(asg, pop, 12);
  int agreements = 0;
  for (int e = 0; e < asg.n_edges(); ++e) {
    if (answers.values[e] == static_cast<Real>(pop.truth[asg.edge(e).question])) {
      ++agreements;
    }
  }
  const Real rate = static_cast<Real>(agreements) / n_questions;
  CHECK(std::abs(rate - 0.8) <= 3.0 * std::sqrt(0.8 * 0.2 / n_questions));
}

TEST_CASE("sample_answers: every entry squared equals one") {
  const Assignment asg = degree_regular_assignment(20, 20, 4, 4, 2);
  ReliabilitySpec spec;
  spec.mean = 0.6;
  spec.variance = 0.02;
  const Population pop = sample_population(20, 20, spec, TruthPolicy::uniform, 3);
  const AnswerMatrix answers = sample_answers(asg, pop, 4);
  for (int e = 0; e < asg.n_edges(); ++e) {
    CHECK(answers.values[e] * answers.values[e] == 1.0);
  }
}

TEST_CASE("sample_answers: dimension mismatches rejected") {
  const Assignment asg = degree_regular_assignment(6, 6, 2, 2, 4);
  Population pop;
  pop.reliabilities = RealVector::Constant(5, 0.5);
  pop.truth = sample_truth(6, TruthPolicy::all_plus_one, 1);
  CHECK_THROWS_AS(sample_answers(asg, pop, 1), std::invalid_argument);
  pop.reliabilities = RealVector::Constant(6, 0.5);
  pop.truth = sample_truth(5, TruthPolicy::all_plus_one, 1);
  CHECK_THROWS_AS(sample_answers(asg, pop, 1), std::invalid_argument);
}

TEST_CASE("answer_moments: closed form") {
  const AnswerMoments deterministic = answer_moments(1.0, 1);
  CHECK(deterministic.mean == 1.0);
  CHECK(deterministic.variance == 0.0);

  const AnswerMoments coin = answer_moments(0.5, 1);
  CHECK(coin.mean == 0.0);
  CHECK(coin.variance == 1.0);

  const AnswerMoments skewed = answer_moments(0.8, -1);
  CHECK(skewed.mean == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK(skewed.variance == doctest::Approx(0.64).epsilon(1e-15));

  CHECK_THROWS_AS(answer_moments(1.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(answer_moments(0.5, 0), std::invalid_argument);
}

TEST_CASE("answer draws converge to answer_moments on a fixed edge") {
  // 10^4 independent draws of the answer on one edge, 4-sigma tolerances.
  const Assignment asg(1, 2, {{0, 1}});
  Population pop;
  pop.reliabilities = RealVector::Constant(2, 0.7);
  pop.truth = sample_truth(1, TruthPolicy::all_plus_one, 1);
  pop.truth[0] = -1;

  const int n = 10000;
  std::vector<Real> draws;
  draws.reserve(n);
  for (Seed seed = 0; seed < n; ++seed) {
    draws.push_back(sample_answers(asg, pop, seed).values[0]);
  }
  const SampleSummary sum = summarize(draws);
  const AnswerMoments expected = answer_moments(0.7, -1);
  CHECK(std::abs(sum.mean - expected.mean) <= 4.0 * sum.se_mean);
  CHECK(std::abs(sum.variance - expected.variance) <= 4.0 * sum.se_variance);
}

TEST_CASE("fixed seeds reproduce reliabilities and answers bit-identically") {
  ReliabilitySpec spec;
  spec.mean = 0.65;
  spec.variance = 0.03;
  const RealVector p1 = sample_reliabilities(200, spec, 77);
  const RealVector p2 = sample_reliabilities(200, spec, 77);
  CHECK(p1 == p2);

  const Assignment asg = degree_regular_assignment(30, 30, 3, 3, 8);
  const Population pop = sample_population(30, 30, spec, TruthPolicy::uniform, 9);
  const AnswerMatrix a1 = sample_answers(asg, pop, 10);
  const AnswerMatrix a2 = sample_answers(asg, pop, 10);
  CHECK(a1.values == a2.values);
  const AnswerMatrix a3 = sample_answers(asg, pop, 11);
  CHECK(a1.values != a3.values);
}
