#include <cmath>
#include <vector>

#include <doctest.h>

#include "crowdbp/theory.hpp"
#include "enumeration_oracle.hpp"

using namespace crowdbp;

namespace {

bool close(Real a, Real b, Real rel = 1e-9) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("CrowdMoments: parameter and population constructions") {
  const CrowdMoments c = CrowdMoments::from_params(0.7, 0.01);
  CHECK(c.e_p == 0.7);
  CHECK(c.phi == doctest::Approx(0.04 + 0.16));

  RealVector p(4);
  p << 0.5, 0.6, 0.9, 1.0;
  const CrowdMoments e = CrowdMoments::from_population(p);
  CHECK(e.e_p == doctest::Approx(0.75));
  CHECK(e.phi == doctest::Approx((0.0 + 0.04 + 0.64 + 1.0) / 4.0));
  const Real centered = 2.0 * e.e_p - 1.0;
  CHECK(centered * centered <= e.phi + 1e-15);  // Jensen

  CHECK_THROWS_AS(CrowdMoments::from_params(0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(CrowdMoments::from_params(-0.1, 0.0), std::invalid_argument);
}

TEST_CASE("exact_first_moments: deterministic crowd") {
  const Assignment asg = degree_regular_assignment(100, 100, 10, 10, 1);
  Population pop;
  pop.reliabilities = RealVector::Constant(100, 1.0);
  pop.truth = sample_truth(100, TruthPolicy::all_plus_one, 1);
  const Edge edge = asg.edge(0);
  const MomentPrediction m =
      exact_first_moments(asg, pop, edge.user, edge.question);
  CHECK(m.mean == 81.0);      // (s-1)(r-1)
  CHECK(m.variance == 81.0);  // each term contributes 2 - 1 = 1
}

TEST_CASE("exact_first_moments: p_a = 1/2 zeroes the mean") {
  const Assignment asg = degree_regular_assignment(12, 12, 3, 3, 2);
  Population pop;
  pop.reliabilities = RealVector::Constant(12, 0.8);
  pop.reliabilities[4] = 0.5;
  pop.truth = sample_truth(12, TruthPolicy::all_plus_one, 1);
  const int question = asg.questions_of(4)[0];
  CHECK(exact_first_moments(asg, pop, 4, question).mean == 0.0);
  CHECK_THROWS_AS(exact_first_moments(asg, pop, 0, 50), std::invalid_argument);
}

TEST_CASE("exact_first_moments: matches exhaustive enumeration on a 4x4 instance") {
  const Assignment asg = degree_regular_assignment(4, 4, 2, 2, 21);
  Population pop;
  pop.reliabilities.resize(4);
  pop.reliabilities << 0.25, 1.0 / 3.0, 0.5, 0.8;
  pop.truth.resize(4);
  pop.truth << 1, -1, 1, -1;
  for (int e = 0; e < asg.n_edges(); ++e) {
    const Edge edge = asg.edge(e);
    const MomentPrediction fast =
        exact_first_moments(asg, pop, edge.user, edge.question);
    const auto slow = crowdbp_test::enumerate_first_moments(
        asg, pop, edge.user, edge.question);
    CHECK(close(fast.mean, slow.mean));
    CHECK(close(fast.variance, slow.variance));
  }
}

TEST_CASE("exact_first_moments: enumeration agreement with non-unit initial moments") {
  const Assignment asg = degree_regular_assignment(3, 3, 2, 2, 3);
  Population pop;
  pop.reliabilities.resize(3);
  pop.reliabilities << 0.6, 0.75, 0.4;
  pop.truth.resize(3);
  pop.truth << -1, 1, 1;
  const Edge edge = asg.edge(2);
  const MomentPrediction fast =
      exact_first_moments(asg, pop, edge.user, edge.question, 0.5, 2.0);
  const auto slow = crowdbp_test::enumerate_first_moments(
      asg, pop, edge.user, edge.question, 0.5, 2.0);
  CHECK(close(fast.mean, slow.mean));
  CHECK(close(fast.variance, slow.variance));
}

TEST_CASE("approx_first_moments: substitution examples") {
  const MomentPrediction all_sure =
      approx_first_moments(1.0, CrowdMoments{1.0, 1.0}, 10, 10);
  CHECK(all_sure.mean == 81.0);
  CHECK(all_sure.variance == 81.0);

  const MomentPrediction coin =
      approx_first_moments(0.9, CrowdMoments{0.5, 0.04}, 10, 10);
  CHECK(coin.mean == 0.0);

  CHECK_THROWS_AS(approx_first_moments(0.5, CrowdMoments{0.5, 0.0}, 1, 10),
                  std::invalid_argument);
}

TEST_CASE("approx_first_moments equals exact when every neighbor p is identical") {
  const Assignment asg = degree_regular_assignment(20, 20, 4, 4, 17);
  const Real p_common = 0.7;
  const Real p_a = 0.9;
  Population pop;
  pop.reliabilities = RealVector::Constant(20, p_common);
  pop.reliabilities[3] = p_a;
  pop.truth = sample_truth(20, TruthPolicy::all_plus_one, 1);

  const CrowdMoments crowd = CrowdMoments::from_params(p_common, 0.0);
  const int question = asg.questions_of(3)[1];
  const MomentPrediction exact = exact_first_moments(asg, pop, 3, question);
  const MomentPrediction approx = approx_first_moments(p_a, crowd, 4, 4);
  CHECK(close(exact.mean, approx.mean));
  CHECK(close(exact.variance, approx.variance));
}

TEST_CASE("approx_first_moments approaches exact as r grows (i.i.d. neighbors)") {
  // Complete bipartite graphs |Q| = s = 10, |U| = r; the tracked user has a
  // pinned reliability, the rest are i.i.d. draws. Gaps are averaged over
  // population draws; they shrink like the neighbor-average fluctuation.
  const Real p_a = 0.8;
  ReliabilitySpec spec;
  spec.mean = 0.8;
  spec.variance = 0.0049;
  const CrowdMoments crowd = CrowdMoments::from_params(spec.mean, spec.variance);

  std::vector<Real> mean_gap, var_gap;
  for (int r : {10, 50, 200}) {
    Real mg = 0.0, vg = 0.0;
    const int populations = 16;
    for (Seed seed = 0; seed < populations; ++seed) {
      const Assignment asg = degree_regular_assignment(10, r, r, 10, seed);
      Population pop;
      pop.reliabilities = sample_reliabilities(r, spec, derive_seed(seed, 900 + r));
      pop.reliabilities[0] = p_a;
      pop.truth = sample_truth(10, TruthPolicy::all_plus_one, 1);
      const int question = asg.questions_of(0)[0];
      const MomentPrediction exact = exact_first_moments(asg, pop, 0, question);
      const MomentPrediction approx = approx_first_moments(p_a, crowd, r, 10);
      mg += std::abs(approx.mean - exact.mean) / std::abs(exact.mean);
      vg += std::abs(approx.variance - exact.variance) / exact.variance;
    }
    mean_gap.push_back(mg / populations);
    var_gap.push_back(vg / populations);
  }
  CHECK(mean_gap[1] < mean_gap[0]);
  CHECK(mean_gap[2] < mean_gap[1]);
  CHECK(var_gap[1] < var_gap[0]);
  CHECK(var_gap[2] < var_gap[1]);
  CHECK(mean_gap[2] < 0.05);
  CHECK(var_gap[2] < 0.05);
}

TEST_CASE("series_mean: closed-form values and the one-step recursion") {
  const CrowdMoments crowd{0.7, 0.16};
  CHECK(series_mean(0.9, crowd, 1) == doctest::Approx(0.8 * 0.4));
  CHECK(series_mean(0.9, crowd, 3) == doctest::Approx(0.008192));

  const CrowdMoments sure{1.0, 1.0};
  for (int k = 1; k <= 6; ++k) {
    CHECK(series_mean(0.8, sure, k) == doctest::Approx(0.6));  // ratio 1
  }

  for (const CrowdMoments& c :
       {CrowdMoments{0.7, 0.16}, CrowdMoments{0.55, 0.3}, CrowdMoments{0.9, 0.7}}) {
    for (int k = 2; k <= 10; ++k) {
      CHECK(series_mean(0.8, c, k) ==
            doctest::Approx(c.phi * series_mean(0.8, c, k - 1)));
    }
  }
  CHECK_THROWS_AS(series_mean(0.8, crowd, 0), std::invalid_argument);
}

TEST_CASE("series_variance_bound: unreliable crowd leaves only the v0 term") {
  const CrowdMoments crowd{0.5, 0.1};  // 2 e_p - 1 = 0
  for (int k = 1; k <= 8; ++k) {
    CHECK(series_variance_bound(1.0, crowd, 10, 10, k) ==
          doctest::Approx(std::pow(81.0, -k)).epsilon(1e-12));
  }
}

TEST_CASE("series_variance_bound: k = 1 value of the printed closed form") {
  // The geometric-sum factor collapses to 1 at k = 1, leaving
  // (v0 + r (2 e_p - 1)^2) / delta.
  const CrowdMoments crowd{0.7, 0.3};
  const Real expected = (1.0 + 10.0 * 0.16) / 81.0;
  CHECK(series_variance_bound(1.0, crowd, 10, 10, 1) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("series_variance_bound: dominates the one-step recursion it loosens") {
  for (const CrowdMoments& crowd :
       {CrowdMoments{0.7, 0.3}, CrowdMoments{0.8, 0.5}, CrowdMoments{0.6, 0.2}}) {
    for (auto [r, s] : std::vector<std::pair<int, int>>{{10, 10}, {6, 4}, {4, 8}}) {
      const Real delta = fan_in(r, s);
      const Real c2 = (2.0 * crowd.e_p - 1.0) * (2.0 * crowd.e_p - 1.0);
      Real recursion = 1.0;  // v0
      for (int k = 1; k <= 10; ++k) {
        recursion = recursion / delta +
                    static_cast<Real>(r) * c2 * std::pow(crowd.phi, 2 * k) / delta;
        CHECK(series_variance_bound(1.0, crowd, r, s, k) >= recursion - 1e-15);
      }
    }
  }
}

TEST_CASE("series_variance_bound: removable singularity at phi^2 = 1/delta") {
  const int r = 10, s = 10;
  const Real phi_star = std::pow(fan_in(r, s), -0.5);  // phi^2 == 1/81
  const CrowdMoments at{0.6, phi_star};
  const CrowdMoments above{0.6, phi_star + 1e-9};
  const CrowdMoments below{0.6, phi_star - 1e-9};
  for (int k = 1; k <= 6; ++k) {
    const Real mid = series_variance_bound(1.0, at, r, s, k);
    CHECK(series_variance_bound(1.0, above, r, s, k) ==
          doctest::Approx(mid).epsilon(1e-4));
    CHECK(series_variance_bound(1.0, below, r, s, k) ==
          doctest::Approx(mid).epsilon(1e-4));
  }
}

TEST_CASE("series_variance_bound: nonnegative and decreasing under the condition") {
  for (int rs : {3, 4, 6, 10}) {
    for (Real e_p : {0.6, 0.75, 0.9}) {
      // Choose phi comfortably inside the condition's window.
      const Real delta = fan_in(rs, rs);
      const Real phi = std::min(0.9, std::max(2.0 / std::sqrt(delta),
                                              (2 * e_p - 1) * (2 * e_p - 1)));
      const CrowdMoments crowd{e_p, phi};
      if (!convergence_condition(crowd, rs, rs)) continue;
      Real prev = series_variance_bound(1.0, crowd, rs, rs, 1);
      CHECK(prev >= 0.0);
      for (int k = 2; k <= 30; ++k) {
        const Real cur = series_variance_bound(1.0, crowd, rs, rs, k);
        CHECK(cur >= 0.0);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
      }
    }
  }
}

TEST_CASE("relative error of the closed forms stays bounded under the condition") {
  for (int rs : {4, 6, 10}) {
    for (Real e_p : {0.65, 0.8}) {
      for (Real p_a : {0.2, 0.7, 0.95}) {
        const Real delta = fan_in(rs, rs);
        const Real phi = std::min(0.8, std::max(1.5 / std::sqrt(delta),
                                                (2 * e_p - 1) * (2 * e_p - 1)));
        const CrowdMoments crowd{e_p, phi};
        if (!convergence_condition(crowd, rs, rs)) continue;
        std::vector<Real> ratio;
        for (int k = 1; k <= 200; ++k) {
          const Real mu = series_mean(p_a, crowd, k);
          REQUIRE(mu != 0.0);
          ratio.push_back(std::sqrt(series_variance_bound(1.0, crowd, rs, rs, k)) /
                          std::abs(mu));
        }
        const Real cap = std::max(ratio.front(), ratio.back()) * (1.0 + 1e-9);
        for (Real value : ratio) {
          CHECK(std::isfinite(value));
          CHECK(value <= cap);
        }
      }
    }
  }
}

TEST_CASE("convergence_condition: boundary and example values") {
  // r = s = 10: 1/delta = 1/81 ~ 0.0123.
  CHECK_FALSE(convergence_condition(CrowdMoments{0.5, std::sqrt(0.008)}, 10, 10));
  CHECK(convergence_condition(CrowdMoments{0.6, std::sqrt(0.5)}, 10, 10));
  CHECK_FALSE(convergence_condition(CrowdMoments{1.0, 1.0}, 10, 10));  // strict
  CHECK(convergence_condition(CrowdMoments{0.6, std::pow(81.0, -0.5)}, 10, 10));
}

TEST_CASE("asymptotic_decision: sign behavior") {
  RealVector answers(3), rel(3);
  answers << 1.0, 1.0, -1.0;
  rel << 0.9, 0.8, 0.2;  // the wrong user has negative centered reliability
  CHECK(asymptotic_decision(answers, rel, 0.8) == 1);
  CHECK(asymptotic_decision(answers, rel, 0.2) == -1);  // crowd flip
  CHECK(asymptotic_decision(answers, rel, 0.5) == 0);   // zero crowd factor

  RealVector balanced_answers(2), balanced_rel(2);
  balanced_answers << 1.0, -1.0;
  balanced_rel << 0.8, 0.8;
  CHECK(asymptotic_decision(balanced_answers, balanced_rel, 0.9) == 0);

  RealVector bad(1);
  CHECK_THROWS_AS(asymptotic_decision(answers, bad, 0.5), std::invalid_argument);
}

TEST_CASE("asymptotic_decision: all-correct reliable users recover the truth") {
  // z = +1, everyone answered +1 with p_b > 0.5 and a reliable crowd.
  RealVector answers = RealVector::Constant(5, 1.0);
  RealVector rel(5);
  rel << 0.6, 0.7, 0.8, 0.9, 0.99;
  CHECK(asymptotic_decision(answers, rel, 0.75) == 1);
}
