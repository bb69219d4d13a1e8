#pragma once

// Real-time policy execution on the agent side.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrm/policy.hpp"
#include "rrm/replay.hpp"
#include "rrm/rng.hpp"

namespace rrm {

/// Majority vote over members' argmax. Ties go to the highest ensemble-mean
/// Q, then to the lowest action index.
std::size_t greedy_action(const Policy& policy, std::span<const double> state);

/// Softmax over ensemble-mean Q divided by temperature.
std::size_t boltzmann_action(const Policy& policy, std::span<const double> state, double temperature,
                             SplitMix& rng);

/// One agent's decision loop. Single-threaded; policies are shared
/// immutable values so one trained ensemble can drive many agents.
class Agent {
 public:
  Agent(std::string agent_id, std::shared_ptr<const Policy> policy, std::uint64_t seed);

  const std::string& id() const { return id_; }
  const Policy& policy() const { return *policy_; }
  std::shared_ptr<const Policy> policy_ptr() const { return policy_; }
  bool has_pending() const { return pending_.has_value(); }

  /// Added to sim_time before evaluating the exploration schedule, so the
  /// schedule can run on a clock that spans several episodes.
  void set_exploration_offset(double seconds) { exploration_offset_ = seconds; }
  /// Fixed epsilon regardless of the schedule (e.g. 0 for greedy evaluation).
  void set_epsilon_override(std::optional<double> epsilon) { epsilon_override_ = epsilon; }
  double epsilon(double sim_time) const;

  /// Epsilon-greedy decision; opens the pending (state, action) pair.
  std::size_t select_action(std::span<const double> state, double sim_time);
  /// Boltzmann decision; opens the pending pair as select_action does.
  std::size_t select_boltzmann(std::span<const double> state, double sim_time, double temperature);

  /// Closes the pending pair into a transition.
  Transition observe(double reward, std::span<const double> next_state, bool terminal, double sim_time);
  /// Drops the pending pair without emitting (undefined reward interval).
  void discard_pending() { pending_.reset(); }

  /// Swaps in a strictly newer policy. Takes effect at the next decision.
  void update_policy(std::shared_ptr<const Policy> policy);

 private:
  struct Pending {
    std::vector<double> state;
    std::size_t action;
    double sim_time;
  };
  std::size_t open(std::span<const double> state, std::size_t action, double sim_time);
  void check_state(std::span<const double> state) const;

  std::string id_;
  std::shared_ptr<const Policy> policy_;
  SplitMix rng_;
  std::optional<Pending> pending_;
  double exploration_offset_ = 0.0;
  std::optional<double> epsilon_override_;
};

}  // namespace rrm
