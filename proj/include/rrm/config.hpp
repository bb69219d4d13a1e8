#pragma once

// Experiment configuration and its JSON document form.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rrm/nfq.hpp"
#include "rrm/policy.hpp"
#include "rrm/scenarios.hpp"

namespace rrm {

struct ExperimentConfig {
  ScenarioSpec scenario = ScenarioSpec::power_control();
  /// ensemble_specs may be left empty; the default ensemble sized for the
  /// scenario is used then.
  TrainerConfig trainer;
  ExplorationSchedule schedule;
  std::size_t rounds = 5;
  std::size_t episodes_per_round = 10;
  double episode_duration = 60.0;
  /// Greedy episodes run after each round to measure the deployed policy.
  std::size_t eval_episodes = 2;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  /// Fixed parameter values for the baseline sweep.
  std::vector<double> baseline_sweep;
  std::optional<std::size_t> replay_capacity;

  void validate() const;
  /// Trainer config with input/output dims filled from the scenario.
  TrainerConfig resolved_trainer(std::uint64_t seed) const;
};

/// Every key is optional except scenario.id; unknown keys are rejected with
/// the dotted path of the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
/// Complete document (every field written), parseable by parse_config.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace rrm
