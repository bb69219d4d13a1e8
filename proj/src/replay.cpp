#include "rrm/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rrm/rng.hpp"

namespace rrm {

using nlohmann::json;

void Transition::validate(std::optional<std::size_t> action_count) const {
  if (state.size() != next_state.size())
    throw Error(ErrorCode::shape, "transition state and next_state lengths differ");
  if (!std::isfinite(reward)) throw Error(ErrorCode::invalid_argument, "transition reward is not finite");
  if (action_count && action >= *action_count)
    throw Error(ErrorCode::invalid_argument, "transition action out of range");
}

ReplayStore::ReplayStore(std::optional<std::size_t> capacity) : capacity_(capacity) {
  if (capacity_ && *capacity_ == 0) throw Error(ErrorCode::invalid_argument, "replay capacity must be >= 1");
}

void ReplayStore::append(Transition t) {
  t.validate();
  if (feature_dim_ && t.state.size() != *feature_dim_)
    throw Error(ErrorCode::shape, "transition has " + std::to_string(t.state.size()) +
                                      " features, store holds " + std::to_string(*feature_dim_));
  feature_dim_ = t.state.size();
  if (capacity_ && items_.size() == *capacity_) items_.erase(items_.begin());
  items_.push_back(std::move(t));
}

ReplayStore merge(const ReplayStore& a, const ReplayStore& b) {
  if (a.feature_dim() && b.feature_dim() && *a.feature_dim() != *b.feature_dim())
    throw Error(ErrorCode::shape, "cannot merge stores with different feature dimensions");
  std::vector<const Transition*> all;
  all.reserve(a.size() + b.size());
  for (const auto& t : a.transitions()) all.push_back(&t);
  for (const auto& t : b.transitions()) all.push_back(&t);
  std::stable_sort(all.begin(), all.end(), [](const Transition* x, const Transition* y) {
    if (x->sim_time != y->sim_time) return x->sim_time < y->sim_time;
    return x->agent_id < y->agent_id;
  });

  std::optional<std::size_t> capacity;
  if (a.capacity() && b.capacity()) capacity = std::max(*a.capacity(), *b.capacity());
  ReplayStore out(capacity);
  const Transition* prev = nullptr;
  for (const Transition* t : all) {
    if (prev && prev->sim_time == t->sim_time && prev->agent_id == t->agent_id) continue;
    out.append(*t);
    prev = t;
  }
  return out;
}

std::vector<Transition> sample(const ReplayStore& store, std::size_t n, std::uint64_t seed) {
  if (n > store.size())
    throw Error(ErrorCode::invalid_argument, "cannot sample " + std::to_string(n) + " of " +
                                                 std::to_string(store.size()) + " transitions");
  std::vector<std::size_t> idx(store.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix rng(seed);
  // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(store.transitions()[idx[i]]);
  return out;
}

std::string transition_to_json_line(const Transition& t) {
  json j;
  j["state"] = t.state;
  j["action"] = t.action;
  j["reward"] = t.reward;
  j["next_state"] = t.next_state;
  j["terminal"] = t.terminal;
  j["agent_id"] = t.agent_id;
  j["sim_time"] = t.sim_time;
  return j.dump();
}

namespace {

const json& field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end())
    throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": missing field '" + name + "'");
  return *it;
}

std::vector<double> number_array(const json& j, const char* name, std::size_t line) {
  const json& a = field(j, name, line);
  if (!a.is_array()) throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": '" + name + "' is not an array");
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) {
    if (!x.is_number())
      throw Error(ErrorCode::parse, "line " + std::to_string(line) + ": '" + name + "' holds a non-number");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

Transition transition_from_json_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": not an object");
  static const char* kFields[] = {"state", "action", "reward", "next_state", "terminal", "agent_id", "sim_time"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(kFields), std::end(kFields), [&](const char* f) { return key == f; }) ==
        std::end(kFields))
      throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": unknown field '" + key + "'");

  Transition t;
  t.state = number_array(j, "state", line_number);
  t.next_state = number_array(j, "next_state", line_number);
  const json& action = field(j, "action", line_number);
  if (!action.is_number_unsigned() && !(action.is_number_integer() && action.get<long long>() >= 0))
    throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": 'action' must be a non-negative integer");
  t.action = action.get<std::size_t>();
  const json& reward = field(j, "reward", line_number);
  if (!reward.is_number()) throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": 'reward' must be a number");
  t.reward = reward.get<double>();
  const json& terminal = field(j, "terminal", line_number);
  if (!terminal.is_boolean())
    throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": 'terminal' must be a boolean");
  t.terminal = terminal.get<bool>();
  const json& agent = field(j, "agent_id", line_number);
  if (!agent.is_string()) throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": 'agent_id' must be a string");
  t.agent_id = agent.get<std::string>();
  const json& time = field(j, "sim_time", line_number);
  if (!time.is_number()) throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": 'sim_time' must be a number");
  t.sim_time = time.get<double>();
  try {
    t.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, "line " + std::to_string(line_number) + ": " + e.what());
  }
  return t;
}

void persist(const ReplayStore& store, std::ostream& out) {
  for (const auto& t : store.transitions()) out << transition_to_json_line(t) << '\n';
}

std::string persist(const ReplayStore& store) {
  std::ostringstream out;
  persist(store, out);
  return out.str();
}

ReplayStore load(std::istream& in) {
  ReplayStore store;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Transition t = transition_from_json_line(line, n);
    try {
      store.append(std::move(t));
    } catch (const Error& e) {
      throw Error(ErrorCode::parse, "line " + std::to_string(n) + ": " + e.what());
    }
  }
  return store;
}

ReplayStore load(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

ReplayStore load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return load(in);
}

void persist_file(const ReplayStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  persist(store, out);
}

}  // namespace rrm
