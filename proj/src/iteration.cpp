#include "crowdbp/iteration.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdbp/theory.hpp"

namespace crowdbp {

namespace {

void check_shapes(const WeightState& state, const AnswerMatrix& answers,
                  const Assignment& asg, const char* op) {
  if (state.weights.size() != asg.n_edges()) {
    throw std::invalid_argument(std::string(op) + ": state has " +
                                std::to_string(state.weights.size()) +
                                " weights for " + std::to_string(asg.n_edges()) +
                                " edges");
  }
  if (answers.values.size() != asg.n_edges()) {
    throw std::invalid_argument(std::string(op) + ": answers have " +
                                std::to_string(answers.values.size()) +
                                " entries for " + std::to_string(asg.n_edges()) +
                                " edges");
  }
}

void check_variant(const WeightState& state, Variant expected, const char* op) {
  if (state.variant != expected) {
    throw std::invalid_argument(std::string(op) + ": wrong state variant");
  }
}

}  // namespace

WeightState init_weights(const Assignment& asg, Seed seed, Real mean,
                         Real variance, Variant variant) {
  if (!(variance >= 0.0)) {
    throw std::invalid_argument("init_weights: variance must be >= 0");
  }
  WeightState state;
  state.variant = variant;
  state.iteration = 0;
  state.weights.resize(asg.n_edges());
  if (variance == 0.0) {
    state.weights.setConstant(mean);
    return state;
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<Real> normal(mean, std::sqrt(variance));
  for (int e = 0; e < asg.n_edges(); ++e) state.weights[e] = normal(rng);
  return state;
}

Real correlation_sum(const Assignment& asg, const AnswerMatrix& answers,
                     const RealVector& weights, int user, int question) {
  Real acc = 0.0;
  const auto& questions = asg.questions_of(user);
  const auto& user_edges = asg.edges_of_user(user);
  for (std::size_t t = 0; t < questions.size(); ++t) {
    const int j = questions[t];
    if (j == question) continue;
    Real inner = 0.0;
    const auto& users = asg.users_of(j);
    const auto& question_edges = asg.edges_of_question(j);
    for (std::size_t u = 0; u < users.size(); ++u) {
      if (users[u] == user) continue;
      inner += answers.values[question_edges[u]] * weights[question_edges[u]];
    }
    acc += answers.values[user_edges[t]] * inner;
  }
  return acc;
}

WeightState kos_step(const WeightState& state, const AnswerMatrix& answers,
                     const Assignment& asg) {
  check_shapes(state, answers, asg, "kos_step");
  check_variant(state, Variant::raw, "kos_step");
  WeightState next;
  next.variant = state.variant;
  next.iteration = state.iteration + 1;
  next.weights.resize(asg.n_edges());
  for (int e = 0; e < asg.n_edges(); ++e) {
    const Edge edge = asg.edge(e);
    next.weights[e] =
        correlation_sum(asg, answers, state.weights, edge.user, edge.question);
  }
  return next;
}

WeightState normalized_step(const WeightState& state,
                            const AnswerMatrix& answers,
                            const Assignment& asg) {
  check_shapes(state, answers, asg, "normalized_step");
  if (state.variant != Variant::normalized && state.variant != Variant::series) {
    throw std::invalid_argument("normalized_step: wrong state variant");
  }
  if (!asg.is_degree_regular()) {
    throw std::invalid_argument("normalized_step: assignment must be degree-regular");
  }
  const Real scale = 1.0 / fan_in(asg.r(), asg.s());
  WeightState next;
  next.variant = state.variant;
  next.iteration = state.iteration + 1;
  next.weights.resize(asg.n_edges());
  for (int e = 0; e < asg.n_edges(); ++e) {
    const Edge edge = asg.edge(e);
    next.weights[e] =
        scale *
        correlation_sum(asg, answers, state.weights, edge.user, edge.question);
  }
  return next;
}

WeightState hard_decision_step(const WeightState& state,
                               const AnswerMatrix& answers,
                               const Assignment& asg) {
  check_shapes(state, answers, asg, "hard_decision_step");
  check_variant(state, Variant::hard_decision, "hard_decision_step");
  if (!asg.is_degree_regular()) {
    throw std::invalid_argument("hard_decision_step: assignment must be degree-regular");
  }
  const Real scale = 1.0 / static_cast<Real>(asg.s() - 1);
  WeightState next;
  next.variant = state.variant;
  next.iteration = state.iteration + 1;
  next.weights.resize(asg.n_edges());
  for (int e = 0; e < asg.n_edges(); ++e) {
    const Edge edge = asg.edge(e);
    const auto& questions = asg.questions_of(edge.user);
    const auto& user_edges = asg.edges_of_user(edge.user);
    Real agreements = 0.0;
    for (std::size_t t = 0; t < questions.size(); ++t) {
      const int j = questions[t];
      if (j == edge.question) continue;
      Real inner = 0.0;
      const auto& users = asg.users_of(j);
      const auto& question_edges = asg.edges_of_question(j);
      for (std::size_t u = 0; u < users.size(); ++u) {
        if (users[u] == edge.user) continue;
        inner += answers.values[question_edges[u]] * state.weights[question_edges[u]];
      }
      // Tied inner majority contributes neither agreement nor disagreement.
      const Real vote = answers.values[user_edges[t]] *
                        static_cast<Real>(sign_of(inner));
      if (vote > 0.0) agreements += 1.0;
    }
    next.weights[e] = scale * agreements;
  }
  return next;
}

DecisionVector decide(const AnswerMatrix& answers, const WeightState& state,
                      const Assignment& asg) {
  check_shapes(state, answers, asg, "decide");
  DecisionVector decisions;
  decisions.values.resize(asg.n_questions());
  for (int i = 0; i < asg.n_questions(); ++i) {
    Real sum = 0.0;
    for (int e : asg.edges_of_question(i)) {
      sum += answers.values[e] * state.weights[e];
    }
    decisions.values[i] = sign_of(sum);
  }
  return decisions;
}

Real question_error_rate(const DecisionVector& decisions,
                         const IntVector& truth) {
  if (decisions.values.size() != truth.size()) {
    throw std::invalid_argument("question_error_rate: size mismatch");
  }
  int wrong = 0;
  for (int i = 0; i < truth.size(); ++i) {
    if (decisions.values[i] != truth[i]) ++wrong;  // 0 counts as an error
  }
  return static_cast<Real>(wrong) / static_cast<Real>(truth.size());
}

std::vector<TrajectoryPoint> run_iterations(const Assignment& asg,
                                            const AnswerMatrix& answers,
                                            const IntVector& truth,
                                            WeightState initial,
                                            int iterations) {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  std::vector<TrajectoryPoint> points;
  points.reserve(static_cast<std::size_t>(iterations) + 1);

  WeightState state = std::move(initial);
  for (int k = 0; k <= iterations; ++k) {
    if (k > 0) {
      switch (state.variant) {
        case Variant::raw:
          state = kos_step(state, answers, asg);
          break;
        case Variant::normalized:
        case Variant::series:
          state = normalized_step(state, answers, asg);
          break;
        case Variant::hard_decision:
          state = hard_decision_step(state, answers, asg);
          break;
      }
    }
    DecisionVector decisions = decide(answers, state, asg);
    const Real error = question_error_rate(decisions, truth);
    points.push_back(TrajectoryPoint{state, std::move(decisions), error});
  }
  return points;
}

MetataskRun run_single_metatask(const MetataskConfig& cfg) {
  if (cfg.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  Assignment asg = degree_regular_assignment(
      cfg.n_questions, cfg.n_users, cfg.r, cfg.s,
      derive_seed(cfg.seed, stream::kAssignment));
  Population pop = sample_population(cfg.n_users, cfg.n_questions,
                                     cfg.reliability, cfg.truth_policy, cfg.seed);
  AnswerMatrix answers =
      sample_answers(asg, pop, derive_seed(cfg.seed, stream::kAnswers));
  WeightState initial =
      init_weights(asg, derive_seed(cfg.seed, stream::kInitWeights),
                   cfg.init_mean, cfg.init_variance, cfg.variant);

  MetataskRun run{std::move(asg), std::move(pop), std::move(answers), {}, {}};
  run.trajectory = run_iterations(run.assignment, run.answers,
                                  run.population.truth, std::move(initial),
                                  cfg.iterations);
  for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
    const Real max_abs =
        run.trajectory[k].state.weights.cwiseAbs().maxCoeff();
    if (max_abs > cfg.magnitude_warn) {
      run.magnitude_warning_k = static_cast<int>(k);
      break;
    }
  }
  return run;
}

SeriesRun run_metatask_series(const SeriesConfig& cfg) {
  return run_metatask_series_with_population(
      cfg, sample_population(cfg.n_users, cfg.n_questions, cfg.reliability,
                             cfg.truth_policy, cfg.seed));
}

SeriesRun run_metatask_series_with_population(const SeriesConfig& cfg,
                                              const Population& pop) {
  if (cfg.metatasks < 1) throw std::invalid_argument("metatasks must be >= 1");
  if (pop.reliabilities.size() != cfg.n_users ||
      pop.truth.size() != cfg.n_questions) {
    throw std::invalid_argument("run_metatask_series: population size mismatch");
  }
  SeriesRun run;
  run.population = pop;
  run.points.reserve(static_cast<std::size_t>(cfg.metatasks));

  Rng carry_rng = make_rng(derive_seed(cfg.seed, stream::kCarry));
  for (int k = 1; k <= cfg.metatasks; ++k) {
    const Seed task_seed = derive_seed(cfg.seed, static_cast<Seed>(k));
    Assignment asg = degree_regular_assignment(
        cfg.n_questions, cfg.n_users, cfg.r, cfg.s,
        derive_seed(task_seed, stream::kAssignment));
    AnswerMatrix answers = sample_answers(
        asg, run.population, derive_seed(task_seed, stream::kAnswers));

    WeightState prior;
    if (k == 1) {
      prior = init_weights(asg, derive_seed(task_seed, stream::kInitWeights),
                           cfg.init_mean, cfg.init_variance, Variant::series);
    } else {
      const SeriesPoint& prev = run.points.back();
      prior.variant = Variant::series;
      prior.iteration = k - 1;
      prior.weights.resize(asg.n_edges());
      if (cfg.carry == CarryRule::user_mean) {
        RealVector user_mean(cfg.n_users);
        for (int b = 0; b < cfg.n_users; ++b) {
          Real sum = 0.0;
          const auto& prev_edges = prev.assignment.edges_of_user(b);
          for (int e : prev_edges) sum += prev.state.weights[e];
          user_mean[b] = sum / static_cast<Real>(prev_edges.size());
        }
        for (int e = 0; e < asg.n_edges(); ++e) {
          prior.weights[e] = user_mean[asg.edge(e).user];
        }
      } else {
        for (int e = 0; e < asg.n_edges(); ++e) {
          const auto& prev_edges = prev.assignment.edges_of_user(asg.edge(e).user);
          std::uniform_int_distribution<int> pick(
              0, static_cast<int>(prev_edges.size()) - 1);
          prior.weights[e] =
              prev.state.weights[prev_edges[static_cast<std::size_t>(pick(carry_rng))]];
        }
      }
    }

    WeightState state = normalized_step(prior, answers, asg);
    DecisionVector decisions = decide(answers, state, asg);
    const Real error = question_error_rate(decisions, run.population.truth);
    run.points.push_back(SeriesPoint{std::move(asg), std::move(answers),
                                     std::move(state), std::move(decisions),
                                     error});
  }
  return run;
}

}  // namespace crowdbp
