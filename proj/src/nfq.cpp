#include "rrm/nfq.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "rrm/rng.hpp"

namespace rrm {

void TrainerConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::invalid_argument, "gamma must lie in [0, 1)");
  if (q_iterations == 0) throw Error(ErrorCode::invalid_argument, "q_iterations must be >= 1");
  if (ensemble_specs.empty()) throw Error(ErrorCode::invalid_argument, "ensemble_specs must be non-empty");
  fit.validate();
  for (const auto& spec : ensemble_specs) {
    spec.validate();
    if (spec.input_dim != ensemble_specs.front().input_dim || spec.output_dim != ensemble_specs.front().output_dim)
      throw Error(ErrorCode::invalid_argument, "ensemble members must share input_dim and output_dim");
  }
  if (target_clip && !(target_clip->low < target_clip->high))
    throw Error(ErrorCode::invalid_argument, "target_clip low must be below high");
}

std::vector<NetConfig> TrainerConfig::default_ensemble(std::size_t input_dim, std::size_t action_count,
                                                       std::uint64_t seed) {
  const std::vector<std::vector<std::size_t>> shapes{{16}, {32}, {16, 16}, {32, 16}, {64}};
  std::vector<NetConfig> specs;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    NetConfig c;
    c.input_dim = input_dim;
    c.output_dim = action_count;
    c.hidden_layers = shapes[i];
    c.activation = Activation::tanh;
    c.seed = derive_seed(seed, i);
    specs.push_back(c);
  }
  return specs;
}

double q_max(const EnsembleMember& member, const Normalizer& normalizer, std::span<const double> next_state) {
  const auto q = forward(member.weights, normalizer.normalize(next_state));
  return *std::max_element(q.begin(), q.end());
}

namespace {

// Normalized, column-per-transition view of a replay snapshot.
struct BatchView {
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  std::vector<double> rewards;
  std::vector<std::size_t> actions;
  std::vector<bool> terminal;
};

BatchView make_view(const Normalizer& normalizer, std::span<const Transition> ts) {
  const auto d = static_cast<Eigen::Index>(normalizer.dim());
  const auto n = static_cast<Eigen::Index>(ts.size());
  BatchView v{Eigen::MatrixXd(d, n), Eigen::MatrixXd(d, n), {}, {}, {}};
  v.rewards.reserve(ts.size());
  v.actions.reserve(ts.size());
  v.terminal.reserve(ts.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = ts[static_cast<std::size_t>(i)];
    normalizer.normalize_into(t.state, v.states.col(i));
    normalizer.normalize_into(t.next_state, v.next_states.col(i));
    v.rewards.push_back(t.reward);
    v.actions.push_back(t.action);
    v.terminal.push_back(t.terminal);
  }
  return v;
}

double clip_target(double v, const std::optional<TargetClip>& clip) {
  return clip ? std::clamp(v, clip->low, clip->high) : v;
}

// Overwrites data.targets/mask with Bellman targets from `previous`.
void fill_targets(const NetworkWeights& previous, const BatchView& view, double gamma,
                  const std::optional<TargetClip>& clip, Dataset& data) {
  data.targets.setZero();
  data.mask.setZero();
  Eigen::VectorXd next_max;
  if (gamma != 0.0) next_max = forward_batch(previous, view.next_states).colwise().maxCoeff().transpose();
  for (std::size_t i = 0; i < view.rewards.size(); ++i) {
    double target = view.rewards[i];
    if (!view.terminal[i] && gamma != 0.0) target = view.rewards[i] + gamma * next_max(static_cast<Eigen::Index>(i));
    const auto col = static_cast<Eigen::Index>(i);
    const auto row = static_cast<Eigen::Index>(view.actions[i]);
    data.targets(row, col) = clip_target(target, clip);
    data.mask(row, col) = 1.0;
  }
}

Dataset empty_dataset(const BatchView& view, std::size_t action_count) {
  Dataset data;
  data.inputs = view.states;
  data.targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(action_count), view.states.cols());
  data.mask = data.targets;
  return data;
}

struct MemberOutcome {
  NetworkWeights weights;
  std::vector<LossRecord> losses;
  std::vector<double> final_loss;
};

MemberOutcome train_member(std::size_t index, const NetConfig& spec, const BatchView& view,
                           const TrainerConfig& config, const std::optional<TargetClip>& clip) {
  MemberOutcome out;
  out.weights = init_weights(spec);
  Dataset data = empty_dataset(view, spec.output_dim);
  FitConfig fit_config = config.fit;
  for (std::size_t k = 0; k < config.q_iterations; ++k) {
    fill_targets(out.weights, view, config.gamma, clip, data);
    fit_config.seed = derive_seed(config.fit.seed ^ spec.seed, k);
    FitResult r;
    try {
      r = fit(std::move(out.weights), data, fit_config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::divergence) throw;
      throw Error(ErrorCode::divergence, "member " + std::to_string(index) + ", q-iteration " + std::to_string(k) +
                                             ": " + e.what());
    }
    out.weights = std::move(r.weights);
    for (std::size_t e = 0; e < r.loss_history.size(); ++e)
      out.losses.push_back({index, k, e, r.loss_history[e]});
    out.final_loss.push_back(r.loss_history.back());
  }
  return out;
}

}  // namespace

Dataset build_targets(const EnsembleMember& previous, const Normalizer& normalizer,
                      std::span<const Transition> transitions, double gamma, std::optional<TargetClip> clip) {
  if (transitions.empty()) throw Error(ErrorCode::empty_batch, "no transitions to build targets from");
  const BatchView view = make_view(normalizer, transitions);
  Dataset data = empty_dataset(view, previous.weights.output_dim());
  for (std::size_t a : view.actions)
    if (a >= previous.weights.output_dim()) throw Error(ErrorCode::shape, "transition action out of range");
  fill_targets(previous.weights, view, gamma, clip, data);
  return data;
}

TrainResult nfq_train(const ReplayStore& store, const TrainerConfig& config) {
  config.validate();
  if (store.empty()) throw Error(ErrorCode::empty_batch, "replay store is empty");
  const std::size_t action_count = config.ensemble_specs.front().output_dim;
  const std::size_t dim = *store.feature_dim();
  if (dim != config.ensemble_specs.front().input_dim)
    throw Error(ErrorCode::shape, "store feature_dim " + std::to_string(dim) + " does not match ensemble input_dim " +
                                      std::to_string(config.ensemble_specs.front().input_dim));
  std::vector<std::vector<double>> states;
  states.reserve(store.size());
  double reward_bound = 0.0;
  for (const auto& t : store.transitions()) {
    if (t.action >= action_count) throw Error(ErrorCode::shape, "transition action out of range");
    states.push_back(t.state);
    reward_bound = std::max(reward_bound, std::abs(t.reward));
  }

  TrainResult result;
  result.ensemble.normalizer = Normalizer::fit(states, config.normalizer);
  result.ensemble.action_count = action_count;
  const BatchView view = make_view(result.ensemble.normalizer, store.transitions());

  // Clipping fallback bound when a member diverges without explicit clipping.
  const double bound = 10.0 * std::max(reward_bound, 1e-12) / (1.0 - config.gamma);
  auto run = [&](std::size_t i) {
    const auto& spec = config.ensemble_specs[i];
    if (config.target_clip) return std::pair{train_member(i, spec, view, config, config.target_clip), false};
    try {
      return std::pair{train_member(i, spec, view, config, std::nullopt), false};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::divergence) throw;
      return std::pair{train_member(i, spec, view, config, TargetClip{-bound, bound}), true};
    }
  };

  std::vector<std::pair<MemberOutcome, bool>> outcomes;
  const std::size_t m = config.ensemble_specs.size();
  if (config.parallel && m > 1) {
    std::vector<std::future<std::pair<MemberOutcome, bool>>> jobs;
    for (std::size_t i = 0; i < m; ++i) jobs.push_back(std::async(std::launch::async, run, i));
    for (auto& j : jobs) outcomes.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < m; ++i) outcomes.push_back(run(i));
  }

  for (std::size_t i = 0; i < m; ++i) {
    auto& [o, clipped] = outcomes[i];
    result.ensemble.members.push_back({config.ensemble_specs[i], std::move(o.weights)});
    result.losses.insert(result.losses.end(), o.losses.begin(), o.losses.end());
    result.final_loss.push_back(std::move(o.final_loss));
    if (clipped) result.clipped_members.push_back(i);
  }
  result.ensemble.validate();
  return result;
}

Policy package_policy(QEnsemble ensemble, const ExplorationSchedule& schedule, std::vector<std::string> action_labels,
                      std::uint64_t version) {
  if (action_labels.empty()) throw Error(ErrorCode::invalid_argument, "action_labels must be non-empty");
  Policy p;
  p.ensemble = std::move(ensemble);
  p.action_labels = std::move(action_labels);
  p.schedule = schedule;
  p.version = version;
  p.validate();
  return p;
}

}  // namespace rrm
