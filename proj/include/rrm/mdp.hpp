#pragma once

// Small tabular MDPs with an exact value-iteration solver, used as ground
// truth for the learner.

#include <string>
#include <vector>

#include "rrm/replay.hpp"

namespace rrm {

struct TabularMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  /// transition[s][a][s'] = P(s' | s, a)
  std::vector<std::vector<std::vector<double>>> transition;
  /// reward[s][a], paid on taking a in s
  std::vector<std::vector<double>> reward;
  double gamma = 0.9;

  /// Shapes, probabilities in [0,1] summing to 1 per (s, a), gamma in [0, 1).
  void validate() const;

  /// Deterministic chain: action 0 stays, action 1 advances (the last state
  /// advances onto itself). Reward 1 for any action taken in the last state.
  static TabularMdp chain(std::size_t n, double gamma);
};

using QTable = std::vector<std::vector<double>>;

/// Iterates the Bellman optimality operator until the sup-norm change is
/// below tolerance * (1 - gamma) / gamma, which bounds the residual of the
/// returned table by tolerance.
QTable value_iteration(const TabularMdp& mdp, double tolerance = 1e-10);

/// max over (s, a) of |Q(s,a) - (R(s,a) + gamma * E[max Q(s',.)])|.
double bellman_residual(const TabularMdp& mdp, const QTable& q);

/// Greedy action per state, lowest index on ties.
std::vector<std::size_t> greedy_policy(const QTable& q);

/// Actions whose value is within tie_tolerance of the state's best.
std::vector<std::vector<std::size_t>> optimal_actions(const QTable& q, double tie_tolerance);

/// One-hot state encoding.
std::vector<double> one_hot(std::size_t state, std::size_t states);

/// Transitions from episodes of `length` steps started in uniformly random
/// states under a uniformly random behavior policy. The MDP is treated as
/// continuing, so no transition is terminal.
std::vector<Transition> sample_transitions(const TabularMdp& mdp, std::size_t episodes, std::size_t length,
                                           std::uint64_t seed);

/// JSON document {states, actions, gamma, reward: [[...]], and either
/// transition: [[[...]]] or next: [[s']] for deterministic MDPs}.
TabularMdp parse_mdp(const std::string& text);
TabularMdp load_mdp_file(const std::string& path);

}  // namespace rrm
