#include "rrm/policy_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rrm {

using nlohmann::json;

std::string serialize_policy(const Policy& policy) {
  policy.validate();
  json doc;
  doc["version"] = policy.version;
  doc["action_labels"] = policy.action_labels;
  doc["normalizer"] = {{"method", to_string(policy.ensemble.normalizer.method)},
                       {"shift", policy.ensemble.normalizer.shift},
                       {"scale", policy.ensemble.normalizer.scale}};
  json members = json::array();
  for (const auto& m : policy.ensemble.members) {
    json layers = json::array();
    for (const auto& l : m.weights.layers) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row.push_back(l.weights(r, c));
        rows.push_back(std::move(row));
      }
      layers.push_back({{"weights", std::move(rows)}, {"bias", std::vector<double>(l.bias.begin(), l.bias.end())}});
    }
    members.push_back({{"hidden_layers", m.config.hidden_layers},
                       {"activation", to_string(m.weights.activation)},
                       {"layers", std::move(layers)}});
  }
  doc["ensemble"] = std::move(members);
  doc["schedule"] = {{"epsilon_start", policy.schedule.epsilon_start},
                     {"epsilon_end", policy.schedule.epsilon_end},
                     {"decay_duration", policy.schedule.decay_duration},
                     {"shape", to_string(policy.schedule.shape)}};
  return doc.dump(1);
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::parse, "policy field '" + path + "': " + what);
}

const json& require(const json& obj, const std::string& parent, const char* key) {
  const std::string path = parent.empty() ? key : parent + "." + key;
  if (!obj.is_object()) fail(parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path, "missing");
  return *it;
}

void only_keys(const json& obj, const std::string& parent, std::initializer_list<const char*> keys) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) fail(parent.empty() ? k : parent + "." + k, "unknown field");
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

}  // namespace

Policy parse_policy(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("policy document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("", "document must be an object");
  only_keys(doc, "", {"version", "action_labels", "normalizer", "ensemble", "schedule"});

  Policy p;
  const json& version = require(doc, "", "version");
  if (!version.is_number_unsigned()) fail("version", "expected a non-negative integer");
  p.version = version.get<std::uint64_t>();

  const json& labels = require(doc, "", "action_labels");
  if (!labels.is_array() || labels.empty()) fail("action_labels", "expected a non-empty array of strings");
  for (std::size_t i = 0; i < labels.size(); ++i)
    p.action_labels.push_back(string(labels[i], "action_labels[" + std::to_string(i) + "]"));

  const json& norm = require(doc, "", "normalizer");
  only_keys(norm, "normalizer", {"method", "shift", "scale"});
  try {
    p.ensemble.normalizer.method = normalizer_method_from_string(string(require(norm, "normalizer", "method"), "normalizer.method"));
  } catch (const Error& e) {
    fail("normalizer.method", e.what());
  }
  p.ensemble.normalizer.shift = numbers(require(norm, "normalizer", "shift"), "normalizer.shift");
  p.ensemble.normalizer.scale = numbers(require(norm, "normalizer", "scale"), "normalizer.scale");
  try {
    p.ensemble.normalizer.validate();
  } catch (const Error& e) {
    fail("normalizer", e.what());
  }

  const json& members = require(doc, "", "ensemble");
  if (!members.is_array() || members.empty()) fail("ensemble", "expected a non-empty array");
  p.ensemble.action_count = p.action_labels.size();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::string mp = "ensemble[" + std::to_string(i) + "]";
    const json& m = members[i];
    only_keys(m, mp, {"hidden_layers", "activation", "layers"});
    EnsembleMember member;
    const json& hidden = require(m, mp, "hidden_layers");
    if (!hidden.is_array()) fail(mp + ".hidden_layers", "expected an array of integers");
    member.config.hidden_layers.clear();
    for (const auto& h : hidden) {
      if (!h.is_number_unsigned()) fail(mp + ".hidden_layers", "expected an array of integers");
      member.config.hidden_layers.push_back(h.get<std::size_t>());
    }
    try {
      member.weights.activation = activation_from_string(string(require(m, mp, "activation"), mp + ".activation"));
    } catch (const Error& e) {
      fail(mp + ".activation", e.what());
    }
    member.config.activation = member.weights.activation;
    const json& layers = require(m, mp, "layers");
    if (!layers.is_array() || layers.empty()) fail(mp + ".layers", "expected a non-empty array");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string lp = mp + ".layers[" + std::to_string(l) + "]";
      only_keys(layers[l], lp, {"weights", "bias"});
      const json& rows = require(layers[l], lp, "weights");
      if (!rows.is_array() || rows.empty()) fail(lp + ".weights", "expected a non-empty matrix");
      std::vector<std::vector<double>> mat;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        mat.push_back(numbers(rows[r], lp + ".weights[" + std::to_string(r) + "]"));
        if (mat.back().size() != mat.front().size() || mat.back().empty()) fail(lp + ".weights", "ragged matrix");
      }
      const auto bias = numbers(require(layers[l], lp, "bias"), lp + ".bias");
      DenseLayer layer{Eigen::MatrixXd(mat.size(), mat.front().size()), Eigen::VectorXd(bias.size())};
      for (std::size_t r = 0; r < mat.size(); ++r)
        for (std::size_t c = 0; c < mat[r].size(); ++c)
          layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = mat[r][c];
      for (std::size_t r = 0; r < bias.size(); ++r) layer.bias(static_cast<Eigen::Index>(r)) = bias[r];
      member.weights.layers.push_back(std::move(layer));
    }
    try {
      member.weights.validate();
    } catch (const Error& e) {
      fail(mp + ".layers", e.what());
    }
    member.config.input_dim = member.weights.input_dim();
    member.config.output_dim = member.weights.output_dim();
    if (member.config.hidden_layers.size() + 1 != member.weights.layers.size())
      fail(mp + ".hidden_layers", "does not match the number of layers");
    for (std::size_t h = 0; h < member.config.hidden_layers.size(); ++h)
      if (member.config.hidden_layers[h] != member.weights.layers[h].fan_out())
        fail(mp + ".hidden_layers", "does not match layer widths");
    if (member.config.input_dim != p.ensemble.normalizer.dim())
      fail(mp + ".layers", "input width does not match the normalizer");
    if (member.config.output_dim != p.ensemble.action_count)
      fail(mp + ".layers", "output width does not match action_labels");
    p.ensemble.members.push_back(std::move(member));
  }

  const json& sched = require(doc, "", "schedule");
  only_keys(sched, "schedule", {"epsilon_start", "epsilon_end", "decay_duration", "shape"});
  p.schedule.epsilon_start = number(require(sched, "schedule", "epsilon_start"), "schedule.epsilon_start");
  p.schedule.epsilon_end = number(require(sched, "schedule", "epsilon_end"), "schedule.epsilon_end");
  p.schedule.decay_duration = number(require(sched, "schedule", "decay_duration"), "schedule.decay_duration");
  const auto shape = string(require(sched, "schedule", "shape"), "schedule.shape");
  try {
    p.schedule.shape = decay_shape_from_string(shape);
  } catch (const Error& e) {
    fail("schedule.shape", e.what());
  }
  try {
    p.schedule.validate();
  } catch (const Error& e) {
    fail("schedule", e.what());
  }
  return p;
}

Policy load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_policy(ss.str());
}

void save_policy_file(const Policy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << serialize_policy(policy) << '\n';
}

}  // namespace rrm
