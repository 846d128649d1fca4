#pragma once

// Test-only brute-force oracle: first-iteration weight moments by exhaustive
// enumeration of every answer realization, with the initial-weight moments
// folded in analytically. Cost is 2^edges; callers keep graphs small.

#include <map>
#include <utility>
#include <vector>

#include "crowdbp/assignment.hpp"
#include "crowdbp/population.hpp"

namespace crowdbp_test {

struct EnumeratedMoments {
  crowdbp::Real mean;
  crowdbp::Real variance;
};

inline EnumeratedMoments enumerate_first_moments(
    const crowdbp::Assignment& asg, const crowdbp::Population& pop, int user,
    int question, crowdbp::Real init_mean = 1.0,
    crowdbp::Real init_variance = 1.0) {
  using crowdbp::Real;

  // Terms of the double sum: (edge a->j, edge b->j) pairs.
  std::vector<std::pair<int, int>> terms;
  for (int j : asg.questions_of(user)) {
    if (j == question) continue;
    const auto& users = asg.users_of(j);
    const auto& edges = asg.edges_of_question(j);
    const int edge_aj = asg.edge_index(user, j);
    for (std::size_t t = 0; t < users.size(); ++t) {
      if (users[t] == user) continue;
      terms.emplace_back(edge_aj, edges[t]);
    }
  }

  const int n_edges = asg.n_edges();
  long double total_mean = 0.0L;
  long double total_second = 0.0L;
  std::vector<Real> answer(n_edges);
  std::map<int, long double> coefficient;  // per initial-weight variable

  for (unsigned long long mask = 0; mask < (1ULL << n_edges); ++mask) {
    long double prob = 1.0L;
    for (int e = 0; e < n_edges; ++e) {
      const crowdbp::Edge edge = asg.edge(e);
      const Real p = pop.reliabilities[edge.user];
      const int z = pop.truth[edge.question];
      answer[e] = (mask >> e) & 1ULL ? 1.0 : -1.0;
      prob *= (answer[e] == static_cast<Real>(z)) ? p : (1.0 - p);
    }
    if (prob == 0.0L) continue;

    coefficient.clear();
    for (const auto& [edge_aj, edge_bj] : terms) {
      coefficient[edge_bj] += static_cast<long double>(answer[edge_aj]) *
                              static_cast<long double>(answer[edge_bj]);
    }
    long double conditional_mean = 0.0L;
    long double conditional_var = 0.0L;
    for (const auto& [edge_bj, coef] : coefficient) {
      conditional_mean += coef * static_cast<long double>(init_mean);
      conditional_var += coef * coef * static_cast<long double>(init_variance);
    }
    total_mean += prob * conditional_mean;
    total_second +=
        prob * (conditional_var + conditional_mean * conditional_mean);
  }

  EnumeratedMoments out;
  out.mean = static_cast<Real>(total_mean);
  out.variance = static_cast<Real>(total_second - total_mean * total_mean);
  return out;
}

}  // namespace crowdbp_test
