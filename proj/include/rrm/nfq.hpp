#pragma once

// Neural-fitted Q-iteration over an ensemble of independently trained nets.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rrm/approximator.hpp"
#include "rrm/ensemble.hpp"
#include "rrm/policy.hpp"
#include "rrm/replay.hpp"

namespace rrm {

struct TargetClip {
  double low = 0.0;
  double high = 0.0;
};

struct TrainerConfig {
  double gamma = 0.9;
  std::size_t q_iterations = 20;
  FitConfig fit;
  std::vector<NetConfig> ensemble_specs;
  std::optional<TargetClip> target_clip;
  NormalizerMethod normalizer = NormalizerMethod::z_score;
  bool parallel = true;

  void validate() const;

  /// Five members of distinct shapes and seeds, sized for input_dim and
  /// action_count.
  static std::vector<NetConfig> default_ensemble(std::size_t input_dim, std::size_t action_count,
                                                 std::uint64_t seed = 1);
};

struct LossRecord {
  std::size_t member = 0;
  std::size_t q_iteration = 0;
  std::size_t epoch = 0;
  double mse = 0.0;
};

struct TrainResult {
  QEnsemble ensemble;
  std::vector<LossRecord> losses;
  /// final_loss[member][k] is the last recorded epoch loss of Q-iteration k.
  std::vector<std::vector<double>> final_loss;
  /// Members that needed the target-clipping fallback.
  std::vector<std::size_t> clipped_members;
};

/// max over actions of one member's Q-values at a raw state.
double q_max(const EnsembleMember& member, const Normalizer& normalizer, std::span<const double> next_state);

/// Bellman regression set built from the previous iterate of one member:
/// target r for terminal transitions, r + gamma * q_max(s') otherwise, with
/// only the taken action unmasked.
Dataset build_targets(const EnsembleMember& previous, const Normalizer& normalizer,
                      std::span<const Transition> transitions, double gamma,
                      std::optional<TargetClip> clip = std::nullopt);

/// Trains every member for q_iterations rounds of target building and
/// fitting, each member bootstrapping only from its own previous iterate.
/// The action count is the members' shared output_dim.
TrainResult nfq_train(const ReplayStore& store, const TrainerConfig& config);

Policy package_policy(QEnsemble ensemble, const ExplorationSchedule& schedule,
                      std::vector<std::string> action_labels, std::uint64_t version = 1);

}  // namespace rrm
