#include "rrm/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rrm/rng.hpp"

namespace rrm {

using nlohmann::json;

void TabularMdp::validate() const {
  if (states == 0 || actions == 0) throw Error(ErrorCode::invalid_argument, "MDP needs at least one state and action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::invalid_argument, "MDP gamma must be in [0, 1)");
  if (transition.size() != states || reward.size() != states) throw Error(ErrorCode::shape, "MDP tables have wrong state count");
  for (std::size_t s = 0; s < states; ++s) {
    if (transition[s].size() != actions || reward[s].size() != actions)
      throw Error(ErrorCode::shape, "MDP tables have wrong action count at state " + std::to_string(s));
    for (std::size_t a = 0; a < actions; ++a) {
      if (!std::isfinite(reward[s][a])) throw Error(ErrorCode::invalid_argument, "MDP reward is not finite");
      const auto& p = transition[s][a];
      if (p.size() != states) throw Error(ErrorCode::shape, "MDP transition row has wrong length");
      double sum = 0.0;
      for (double x : p) {
        if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::invalid_argument, "MDP probability outside [0, 1]");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::invalid_argument,
                    "MDP probabilities at (" + std::to_string(s) + ", " + std::to_string(a) + ") do not sum to 1");
    }
  }
}

TabularMdp TabularMdp::chain(std::size_t n, double gamma) {
  TabularMdp m;
  m.states = n;
  m.actions = 2;
  m.gamma = gamma;
  m.transition.assign(n, std::vector<std::vector<double>>(2, std::vector<double>(n, 0.0)));
  m.reward.assign(n, std::vector<double>(2, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    m.transition[s][0][s] = 1.0;
    m.transition[s][1][std::min(s + 1, n - 1)] = 1.0;
    if (s + 1 == n) m.reward[s] = {1.0, 1.0};
  }
  m.validate();
  return m;
}

namespace {

double backup(const TabularMdp& m, const QTable& q, std::size_t s, std::size_t a) {
  double future = 0.0;
  for (std::size_t t = 0; t < m.states; ++t)
    if (m.transition[s][a][t] > 0.0) future += m.transition[s][a][t] * *std::max_element(q[t].begin(), q[t].end());
  return m.reward[s][a] + m.gamma * future;
}

}  // namespace

QTable value_iteration(const TabularMdp& mdp, double tolerance) {
  mdp.validate();
  if (!(tolerance > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be > 0");
  QTable q(mdp.states, std::vector<double>(mdp.actions, 0.0));
  if (mdp.gamma == 0.0) return mdp.reward;
  const double stop = tolerance * (1.0 - mdp.gamma) / mdp.gamma;
  for (;;) {
    QTable next = q;
    double change = 0.0;
    for (std::size_t s = 0; s < mdp.states; ++s)
      for (std::size_t a = 0; a < mdp.actions; ++a) {
        next[s][a] = backup(mdp, q, s, a);
        change = std::max(change, std::abs(next[s][a] - q[s][a]));
      }
    q = std::move(next);
    if (change <= stop) return q;
  }
}

double bellman_residual(const TabularMdp& mdp, const QTable& q) {
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t a = 0; a < mdp.actions; ++a) worst = std::max(worst, std::abs(q[s][a] - backup(mdp, q, s, a)));
  return worst;
}

std::vector<std::size_t> greedy_policy(const QTable& q) {
  std::vector<std::size_t> out;
  for (const auto& row : q) out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  return out;
}

std::vector<std::vector<std::size_t>> optimal_actions(const QTable& q, double tie_tolerance) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& row : q) {
    const double best = *std::max_element(row.begin(), row.end());
    std::vector<std::size_t> ok;
    for (std::size_t a = 0; a < row.size(); ++a)
      if (row[a] >= best - tie_tolerance) ok.push_back(a);
    out.push_back(std::move(ok));
  }
  return out;
}

std::vector<double> one_hot(std::size_t state, std::size_t states) {
  std::vector<double> v(states, 0.0);
  v.at(state) = 1.0;
  return v;
}

std::vector<Transition> sample_transitions(const TabularMdp& mdp, std::size_t episodes, std::size_t length,
                                           std::uint64_t seed) {
  mdp.validate();
  SplitMix rng(seed);
  std::vector<Transition> out;
  double clock = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = rng.index(mdp.states);
    for (std::size_t k = 0; k < length; ++k) {
      const std::size_t a = rng.index(mdp.actions);
      double u = rng.unit();
      std::size_t next = mdp.states - 1;
      for (std::size_t t = 0; t < mdp.states; ++t) {
        if (u < mdp.transition[s][a][t]) {
          next = t;
          break;
        }
        u -= mdp.transition[s][a][t];
      }
      Transition tr;
      tr.state = one_hot(s, mdp.states);
      tr.action = a;
      tr.reward = mdp.reward[s][a];
      tr.next_state = one_hot(next, mdp.states);
      tr.agent_id = "mdp";
      tr.sim_time = clock;
      clock += 1.0;
      out.push_back(std::move(tr));
      s = next;
    }
  }
  return out;
}

TabularMdp parse_mdp(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("MDP document: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::parse, "MDP document is not an object");
  for (const auto& [key, _] : j.items())
    if (key != "states" && key != "actions" && key != "gamma" && key != "reward" && key != "transition" && key != "next")
      throw Error(ErrorCode::parse, "MDP field '" + key + "': unknown field");
  TabularMdp m;
  try {
    m.states = j.at("states").get<std::size_t>();
    m.actions = j.at("actions").get<std::size_t>();
    m.gamma = j.at("gamma").get<double>();
    m.reward = j.at("reward").get<std::vector<std::vector<double>>>();
    if (j.contains("transition") == j.contains("next"))
      throw Error(ErrorCode::parse, "MDP field 'transition': give exactly one of 'transition' and 'next'");
    if (j.contains("transition")) {
      m.transition = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    } else {
      const auto next = j.at("next").get<std::vector<std::vector<std::size_t>>>();
      m.transition.assign(next.size(), {});
      for (std::size_t s = 0; s < next.size(); ++s)
        for (std::size_t t : next[s]) {
          if (t >= m.states) throw Error(ErrorCode::parse, "MDP field 'next': state " + std::to_string(t) + " out of range");
          std::vector<double> row(m.states, 0.0);
          row[t] = 1.0;
          m.transition[s].push_back(std::move(row));
        }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("MDP document: ") + e.what());
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("MDP document: ") + e.what());
  }
  return m;
}

TabularMdp load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mdp(ss.str());
}

}  // namespace rrm
