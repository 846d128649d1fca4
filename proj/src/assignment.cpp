#include "crowdbp/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crowdbp {

namespace {

void check_index(int value, int bound, const char* what) {
  if (value < 0 || value >= bound) {
    throw std::invalid_argument(std::string(what) + " index " +
                                std::to_string(value) + " out of range [0, " +
                                std::to_string(bound) + ")");
  }
}

}  // namespace

Assignment::Assignment(int n_questions, int n_users,
                       std::vector<std::vector<int>> users_per_question)
    : n_questions_(n_questions), n_users_(n_users) {
  if (n_questions < 1 || n_users < 1) {
    throw std::invalid_argument("assignment needs at least one question and one user");
  }
  if (static_cast<int>(users_per_question.size()) != n_questions) {
    throw std::invalid_argument("users_per_question size != n_questions");
  }

  users_of_question_ = std::move(users_per_question);
  questions_of_user_.assign(n_users, {});
  edges_of_question_.assign(n_questions, {});
  edges_of_user_.assign(n_users, {});

  for (int i = 0; i < n_questions_; ++i) {
    auto& users = users_of_question_[i];
    std::sort(users.begin(), users.end());
    for (std::size_t t = 0; t < users.size(); ++t) {
      check_index(users[t], n_users_, "user");
      if (t > 0 && users[t] == users[t - 1]) {
        throw std::invalid_argument("duplicate edge: user " +
                                    std::to_string(users[t]) + ", question " +
                                    std::to_string(i));
      }
      const int e = static_cast<int>(edges_.size());
      edges_.push_back(Edge{users[t], i});
      edges_of_question_[i].push_back(e);
      questions_of_user_[users[t]].push_back(i);
      edges_of_user_[users[t]].push_back(e);
    }
  }

  // questions_of_user_ is ascending by construction (question-major fill).
  r_ = 0;
  s_ = 0;
  for (const auto& u : users_of_question_) r_ = std::max(r_, static_cast<int>(u.size()));
  for (const auto& q : questions_of_user_) s_ = std::max(s_, static_cast<int>(q.size()));

  degree_regular_ = true;
  for (const auto& u : users_of_question_) {
    if (static_cast<int>(u.size()) != r_) degree_regular_ = false;
  }
  for (const auto& q : questions_of_user_) {
    if (static_cast<int>(q.size()) != s_) degree_regular_ = false;
  }
}

const std::vector<int>& Assignment::users_of(int question) const {
  check_index(question, n_questions_, "question");
  return users_of_question_[question];
}

const std::vector<int>& Assignment::questions_of(int user) const {
  check_index(user, n_users_, "user");
  return questions_of_user_[user];
}

const std::vector<int>& Assignment::edges_of_question(int question) const {
  check_index(question, n_questions_, "question");
  return edges_of_question_[question];
}

const std::vector<int>& Assignment::edges_of_user(int user) const {
  check_index(user, n_users_, "user");
  return edges_of_user_[user];
}

bool Assignment::has_edge(int user, int question) const {
  check_index(user, n_users_, "user");
  check_index(question, n_questions_, "question");
  const auto& users = users_of_question_[question];
  return std::binary_search(users.begin(), users.end(), user);
}

int Assignment::edge_index(int user, int question) const {
  check_index(user, n_users_, "user");
  check_index(question, n_questions_, "question");
  const auto& users = users_of_question_[question];
  const auto it = std::lower_bound(users.begin(), users.end(), user);
  if (it == users.end() || *it != user) {
    throw std::invalid_argument("no edge between user " + std::to_string(user) +
                                " and question " + std::to_string(question));
  }
  return edges_of_question_[question][static_cast<std::size_t>(it - users.begin())];
}

std::string Assignment::to_text() const {
  std::ostringstream out;
  out << n_questions_ << ' ' << n_users_ << ' ' << r_ << ' ' << s_ << '\n';
  for (int i = 0; i < n_questions_; ++i) {
    const auto& users = users_of_question_[i];
    for (std::size_t t = 0; t < users.size(); ++t) {
      if (t > 0) out << ' ';
      out << users[t];
    }
    out << '\n';
  }
  return out.str();
}

Assignment Assignment::from_text(const std::string& text) {
  std::istringstream in(text);
  int q = 0, u = 0, r = 0, s = 0;
  if (!(in >> q >> u >> r >> s)) {
    throw std::invalid_argument("assignment text: bad header");
  }
  std::string rest;
  std::getline(in, rest);  // consume end of header line
  std::vector<std::vector<int>> users_per_question;
  users_per_question.reserve(static_cast<std::size_t>(q));
  std::string line;
  while (static_cast<int>(users_per_question.size()) < q && std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> users;
    int v = 0;
    while (ls >> v) users.push_back(v);
    users_per_question.push_back(std::move(users));
  }
  if (static_cast<int>(users_per_question.size()) != q) {
    throw std::invalid_argument("assignment text: expected " + std::to_string(q) +
                                " question lines");
  }
  Assignment asg(q, u, std::move(users_per_question));
  if (asg.r() != r || asg.s() != s) {
    throw std::invalid_argument("assignment text: header degrees do not match body");
  }
  return asg;
}

Assignment degree_regular_assignment(int n_questions, int n_users, int r,
                                     int s, Seed seed, int max_attempts) {
  if (r < 2 || s < 2) {
    throw std::invalid_argument("degree-regular assignment requires r >= 2 and s >= 2");
  }
  if (r > n_users || s > n_questions) {
    throw std::invalid_argument("degree-regular assignment requires r <= |U| and s <= |Q|");
  }
  const long long lhs = static_cast<long long>(r) * n_questions;
  const long long rhs = static_cast<long long>(s) * n_users;
  if (lhs != rhs) {
    throw std::invalid_argument("infeasible degrees: r|Q| = " + std::to_string(lhs) +
                                " != s|U| = " + std::to_string(rhs));
  }

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng = make_rng(derive_seed(seed, static_cast<Seed>(attempt)));
    std::vector<int> degree(static_cast<std::size_t>(n_users), 0);
    std::vector<int> available(static_cast<std::size_t>(n_users));
    std::iota(available.begin(), available.end(), 0);

    std::vector<std::vector<int>> users_per_question(
        static_cast<std::size_t>(n_questions));
    bool dead_end = false;
    for (int i = 0; i < n_questions && !dead_end; ++i) {
      const int questions_left = n_questions - i;
      // A user whose remaining capacity equals the number of remaining
      // questions must appear in every one of them, this one included.
      // Picking such users first keeps the fill completable: with every
      // capacity at most questions_left and the capacities summing to
      // r * questions_left, at least r users stay available and at most r
      // are forced.
      auto& users = users_per_question[static_cast<std::size_t>(i)];
      auto forced_end = std::partition(
          available.begin(), available.end(), [&](int a) {
            return s - degree[static_cast<std::size_t>(a)] >= questions_left;
          });
      const int n_forced = static_cast<int>(forced_end - available.begin());
      if (n_forced > r || static_cast<int>(available.size()) < r) {
        dead_end = true;
        break;
      }
      // Fill the remainder with a uniform sample of the free users
      // (partial Fisher-Yates over the tail).
      for (int t = n_forced; t < r; ++t) {
        std::uniform_int_distribution<int> pick(
            t, static_cast<int>(available.size()) - 1);
        std::swap(available[static_cast<std::size_t>(t)],
                  available[static_cast<std::size_t>(pick(rng))]);
      }
      users.assign(available.begin(), available.begin() + r);
      for (int a : users) ++degree[static_cast<std::size_t>(a)];
      available.erase(std::remove_if(available.begin(), available.end(),
                                     [&](int a) {
                                       return degree[static_cast<std::size_t>(a)] >= s;
                                     }),
                      available.end());
    }
    if (dead_end) continue;
    return Assignment(n_questions, n_users, std::move(users_per_question));
  }
  throw std::runtime_error(
      "degree-regular assignment dead-ended in all " +
      std::to_string(max_attempts) + " attempts (|Q|=" + std::to_string(n_questions) +
      ", |U|=" + std::to_string(n_users) + ", r=" + std::to_string(r) +
      ", s=" + std::to_string(s) + ")");
}

std::vector<int> one_hop_neighbors(const Assignment& asg, int user,
                                   int question) {
  if (!asg.has_edge(user, question)) {
    throw std::invalid_argument("one_hop_neighbors: (user " + std::to_string(user) +
                                ", question " + std::to_string(question) +
                                ") is not an edge");
  }
  std::vector<int> result;
  for (int j : asg.questions_of(user)) {
    if (j == question) continue;
    for (int b : asg.users_of(j)) {
      if (b != user) result.push_back(b);
    }
  }
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  return result;
}

std::optional<int> girth(const Assignment& asg) {
  // Nodes: users 0..U-1, then questions U..U+Q-1.
  const int n_users = asg.n_users();
  const int n = n_users + asg.n_questions();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < asg.n_questions(); ++i) {
    for (int a : asg.users_of(i)) {
      adj[static_cast<std::size_t>(a)].push_back(n_users + i);
      adj[static_cast<std::size_t>(n_users + i)].push_back(a);
    }
  }

  int best = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(n));
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int root = 0; root < n; ++root) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(parent.begin(), parent.end(), -1);
    std::queue<int> bfs;
    dist[static_cast<std::size_t>(root)] = 0;
    bfs.push(root);
    while (!bfs.empty()) {
      const int u = bfs.front();
      bfs.pop();
      if (2 * dist[static_cast<std::size_t>(u)] >= best) break;
      for (int w : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(w)] < 0) {
          dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
          parent[static_cast<std::size_t>(w)] = u;
          bfs.push(w);
        } else if (parent[static_cast<std::size_t>(u)] != w) {
          // Non-tree edge closes a walk through the root; its length upper
          // bounds some cycle and, minimized over roots, attains the girth.
          best = std::min(best, dist[static_cast<std::size_t>(u)] +
                                    dist[static_cast<std::size_t>(w)] + 1);
        }
      }
    }
    if (best == 4) break;  // no shorter cycle exists in a simple bipartite graph
  }
  if (best == std::numeric_limits<int>::max()) return std::nullopt;
  return best;
}

}  // namespace crowdbp
