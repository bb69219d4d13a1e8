#include "rrm/ensemble.hpp"

#include <algorithm>

namespace rrm {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

void QEnsemble::validate() const {
  if (members.empty()) throw Error(ErrorCode::invalid_argument, "ensemble has no members");
  if (action_count == 0) throw Error(ErrorCode::invalid_argument, "ensemble action_count must be >= 1");
  normalizer.validate();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& w = members[i].weights;
    w.validate();
    if (w.input_dim() != normalizer.dim())
      throw Error(ErrorCode::shape, "member " + std::to_string(i) + " input_dim does not match the normalizer");
    if (w.output_dim() != action_count)
      throw Error(ErrorCode::shape, "member " + std::to_string(i) + " output_dim does not match action_count");
  }
}

std::vector<double> QEnsemble::member_q(std::size_t member, std::span<const double> state) const {
  const auto x = normalizer.normalize(state);
  return forward(members.at(member).weights, x);
}

std::vector<std::vector<double>> QEnsemble::all_q(std::span<const double> state) const {
  const auto x = normalizer.normalize(state);
  std::vector<std::vector<double>> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(forward(m.weights, x));
  return out;
}

std::vector<double> QEnsemble::mean_q(std::span<const double> state) const {
  const auto qs = all_q(state);
  std::vector<double> mean(action_count, 0.0);
  for (const auto& q : qs)
    for (std::size_t a = 0; a < action_count; ++a) mean[a] += q[a];
  for (auto& m : mean) m /= static_cast<double>(qs.size());
  return mean;
}

}  // namespace rrm
