#include "rrm/agent.hpp"

#include <algorithm>
#include <cmath>

namespace rrm {

std::string to_string(DecayShape s) { return s == DecayShape::linear ? "linear" : "exponential"; }

DecayShape decay_shape_from_string(const std::string& s) {
  if (s == "linear") return DecayShape::linear;
  if (s == "exponential") return DecayShape::exponential;
  throw Error(ErrorCode::parse, "unknown decay shape '" + s + "'");
}

void ExplorationSchedule::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(epsilon_start) || !in_unit(epsilon_end))
    throw Error(ErrorCode::invalid_argument, "epsilon values must lie in [0, 1]");
  if (epsilon_start < epsilon_end) throw Error(ErrorCode::invalid_argument, "epsilon_start must be >= epsilon_end");
  if (!(decay_duration > 0.0)) throw Error(ErrorCode::invalid_argument, "decay_duration must be > 0");
}

double epsilon_at(const ExplorationSchedule& s, double sim_time) {
  if (sim_time <= 0.0) return s.epsilon_start;
  if (sim_time >= s.decay_duration) return s.epsilon_end;
  const double frac = sim_time / s.decay_duration;
  const double span = s.epsilon_start - s.epsilon_end;
  double eps;
  if (s.shape == DecayShape::linear) {
    eps = s.epsilon_start - span * frac;
  } else {
    // Geometric decay of the excess over epsilon_end, rescaled so the curve
    // hits epsilon_end exactly at decay_duration.
    constexpr double kFloor = 0.01;
    eps = s.epsilon_end + span * (std::pow(kFloor, frac) - kFloor) / (1.0 - kFloor);
  }
  return std::clamp(eps, s.epsilon_end, s.epsilon_start);
}

void Policy::validate() const {
  ensemble.validate();
  schedule.validate();
  if (action_labels.empty()) throw Error(ErrorCode::invalid_argument, "policy has no action labels");
  if (action_labels.size() != ensemble.action_count)
    throw Error(ErrorCode::shape, "action_labels length does not match the ensemble action count");
}

std::size_t greedy_action(const Policy& policy, std::span<const double> state) {
  const auto qs = policy.ensemble.all_q(state);
  const std::size_t n = policy.ensemble.action_count;
  std::vector<std::size_t> votes(n, 0);
  std::vector<double> mean(n, 0.0);
  for (const auto& q : qs) {
    ++votes[argmax(q)];
    for (std::size_t a = 0; a < n; ++a) mean[a] += q[a];
  }
  for (auto& m : mean) m /= static_cast<double>(qs.size());
  std::size_t best = 0;
  for (std::size_t a = 1; a < n; ++a) {
    if (votes[a] > votes[best] || (votes[a] == votes[best] && mean[a] > mean[best])) best = a;
  }
  return best;
}

std::size_t boltzmann_action(const Policy& policy, std::span<const double> state, double temperature,
                             SplitMix& rng) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::invalid_argument, "temperature must be > 0");
  const auto mean = policy.ensemble.mean_q(state);
  const double top = *std::max_element(mean.begin(), mean.end());
  std::vector<double> w(mean.size());
  double total = 0.0;
  for (std::size_t a = 0; a < mean.size(); ++a) total += (w[a] = std::exp((mean[a] - top) / temperature));
  double u = rng.unit() * total;
  for (std::size_t a = 0; a < w.size(); ++a) {
    if (u < w[a]) return a;
    u -= w[a];
  }
  return w.size() - 1;
}

Agent::Agent(std::string agent_id, std::shared_ptr<const Policy> policy, std::uint64_t seed)
    : id_(std::move(agent_id)), policy_(std::move(policy)), rng_(seed) {
  if (!policy_) throw Error(ErrorCode::invalid_argument, "agent needs a policy");
}

double Agent::epsilon(double sim_time) const {
  if (epsilon_override_) return *epsilon_override_;
  return epsilon_at(policy_->schedule, sim_time + exploration_offset_);
}

void Agent::check_state(std::span<const double> state) const {
  if (state.size() != policy_->ensemble.input_dim())
    throw Error(ErrorCode::shape, "state has " + std::to_string(state.size()) + " features, policy expects " +
                                      std::to_string(policy_->ensemble.input_dim()));
  for (double x : state)
    if (!std::isfinite(x)) throw Error(ErrorCode::invalid_argument, "state holds a non-finite feature");
}

std::size_t Agent::open(std::span<const double> state, std::size_t action, double sim_time) {
  pending_ = Pending{{state.begin(), state.end()}, action, sim_time};
  return action;
}

std::size_t Agent::select_action(std::span<const double> state, double sim_time) {
  check_state(state);
  const double eps = epsilon(sim_time);
  const std::size_t n = policy_->action_count();
  // One draw per decision keeps the random stream aligned across policies.
  const double u = rng_.unit();
  if (u < eps) return open(state, rng_.index(n), sim_time);
  return open(state, greedy_action(*policy_, state), sim_time);
}

std::size_t Agent::select_boltzmann(std::span<const double> state, double sim_time, double temperature) {
  check_state(state);
  return open(state, boltzmann_action(*policy_, state, temperature, rng_), sim_time);
}

Transition Agent::observe(double reward, std::span<const double> next_state, bool terminal, double /*sim_time*/) {
  if (!pending_) throw Error(ErrorCode::protocol, "agent " + id_ + ": observe without a pending decision");
  Transition t;
  t.state = std::move(pending_->state);
  t.action = pending_->action;
  t.reward = reward;
  t.next_state.assign(next_state.begin(), next_state.end());
  t.terminal = terminal;
  t.agent_id = id_;
  t.sim_time = pending_->sim_time;
  pending_.reset();
  t.validate(policy_->action_count());
  return t;
}

void Agent::update_policy(std::shared_ptr<const Policy> policy) {
  if (!policy) throw Error(ErrorCode::invalid_argument, "null policy");
  if (policy->version <= policy_->version)
    throw Error(ErrorCode::stale_policy, "policy version " + std::to_string(policy->version) +
                                             " is not newer than " + std::to_string(policy_->version));
  if (policy->ensemble.input_dim() != policy_->ensemble.input_dim() ||
      policy->action_count() != policy_->action_count())
    throw Error(ErrorCode::shape, "new policy has a different state or action dimension");
  policy_ = std::move(policy);
}

}  // namespace rrm
