#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrm/ensemble.hpp"

namespace rrm {

enum class DecayShape { linear, exponential };

std::string to_string(DecayShape s);
DecayShape decay_shape_from_string(const std::string& s);

struct ExplorationSchedule {
  double epsilon_start = 0.9;
  double epsilon_end = 0.1;
  double decay_duration = 40.0;  // seconds of sim time
  DecayShape shape = DecayShape::linear;

  void validate() const;
  bool operator==(const ExplorationSchedule&) const = default;
};

/// Exploration probability at a given sim time, clamped to
/// [epsilon_end, epsilon_start].
double epsilon_at(const ExplorationSchedule& schedule, double sim_time);

/// The artifact shipped from trainer to agents.
struct Policy {
  QEnsemble ensemble;
  std::vector<std::string> action_labels;
  ExplorationSchedule schedule;
  std::uint64_t version = 1;

  void validate() const;
  std::size_t action_count() const { return action_labels.size(); }
};

}  // namespace rrm
