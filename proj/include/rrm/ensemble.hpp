#pragma once

#include <span>
#include <vector>

#include "rrm/approximator.hpp"

namespace rrm {

struct EnsembleMember {
  NetConfig config;
  NetworkWeights weights;
};

/// Ensemble Q-function: independently trained nets sharing one input
/// normalizer and one action set.
struct QEnsemble {
  std::vector<EnsembleMember> members;
  Normalizer normalizer;
  std::size_t action_count = 0;

  void validate() const;
  std::size_t input_dim() const { return normalizer.dim(); }

  /// Raw (unnormalized) state in, per-action Q-values of one member out.
  std::vector<double> member_q(std::size_t member, std::span<const double> state) const;
  /// Q-values of every member, in member order.
  std::vector<std::vector<double>> all_q(std::span<const double> state) const;
  std::vector<double> mean_q(std::span<const double> state) const;
};

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace rrm
