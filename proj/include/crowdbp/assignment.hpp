#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdbp/rng.hpp"

namespace crowdbp {

struct Edge {
  int user;
  int question;
};

/// Bipartite assignment of questions to users.
///
/// Edges are simple and stored in a canonical order: question-major, user
/// indices ascending within each question. Edge ids index the per-edge
/// vectors used by AnswerMatrix and WeightState. The type is immutable after
/// construction; all queries are read-only.
class Assignment {
 public:
  Assignment(int n_questions, int n_users,
             std::vector<std::vector<int>> users_per_question);

  int n_questions() const { return n_questions_; }
  int n_users() const { return n_users_; }
  int n_edges() const { return static_cast<int>(edges_.size()); }

  // Declared degrees (users per question, questions per user). For a
  // degree-regular assignment these equal every node's degree; for
  // irregular hand-built graphs they are the maximum degrees.
  int r() const { return r_; }
  int s() const { return s_; }
  bool is_degree_regular() const { return degree_regular_; }

  const std::vector<int>& users_of(int question) const;
  const std::vector<int>& questions_of(int user) const;
  // Edge ids parallel to users_of / questions_of.
  const std::vector<int>& edges_of_question(int question) const;
  const std::vector<int>& edges_of_user(int user) const;

  Edge edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
  bool has_edge(int user, int question) const;
  int edge_index(int user, int question) const;  // throws if absent

  // Line-oriented text form: header "Q U r s", then one line per question
  // listing its user indices. Used for golden tests and replay.
  std::string to_text() const;
  static Assignment from_text(const std::string& text);

 private:
  int n_questions_ = 0;
  int n_users_ = 0;
  int r_ = 0;
  int s_ = 0;
  bool degree_regular_ = false;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> users_of_question_;
  std::vector<std::vector<int>> questions_of_user_;
  std::vector<std::vector<int>> edges_of_question_;
  std::vector<std::vector<int>> edges_of_user_;
};

/// Builds a degree-regular assignment by the greedy procedure: iterate
/// questions in order, assign each to r distinct users drawn uniformly at
/// random from users with remaining capacity, removing users whose degree
/// reaches s. The greedy draw can dead-end (fewer than r users left with
/// capacity); the builder then restarts with a fresh seed stream, up to
/// max_attempts, and fails with a diagnostic afterwards.
Assignment degree_regular_assignment(int n_questions, int n_users, int r,
                                     int s, Seed seed, int max_attempts = 100);

/// Users b != a that share at least one of a's questions other than
/// `question`. Sorted ascending; size is at most (r-1)(s-1).
std::vector<int> one_hop_neighbors(const Assignment& asg, int user,
                                   int question);

/// Length of the shortest cycle in the bipartite graph (always even),
/// or nullopt for a forest.
std::optional<int> girth(const Assignment& asg);

}  // namespace crowdbp
