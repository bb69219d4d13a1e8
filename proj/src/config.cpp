#include "rrm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rrm {

using nlohmann::json;

void ExperimentConfig::validate() const {
  scenario.validate();
  schedule.validate();
  if (rounds < 1) throw Error(ErrorCode::invalid_argument, "rounds must be >= 1");
  if (episodes_per_round < 1) throw Error(ErrorCode::invalid_argument, "episodes_per_round must be >= 1");
  if (!(episode_duration >= scenario.control_interval))
    throw Error(ErrorCode::invalid_argument, "episode_duration must cover at least one control interval");
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "seeds must be non-empty");
  if (replay_capacity && *replay_capacity == 0) throw Error(ErrorCode::invalid_argument, "replay_capacity must be >= 1");
  for (double v : baseline_sweep)
    if (v < scenario.param_min || v > scenario.param_max)
      throw Error(ErrorCode::invalid_argument, "baseline value " + std::to_string(v) + " outside parameter bounds");
  resolved_trainer(seeds.front()).validate();
}

TrainerConfig ExperimentConfig::resolved_trainer(std::uint64_t seed) const {
  TrainerConfig t = trainer;
  if (t.ensemble_specs.empty()) {
    t.ensemble_specs = TrainerConfig::default_ensemble(scenario.feature_dim(), scenario.action_count(), seed);
  } else {
    for (auto& m : t.ensemble_specs) {
      m.input_dim = scenario.feature_dim();
      m.output_dim = scenario.action_count();
      m.seed = derive_seed(seed, m.seed);
    }
  }
  t.fit.seed = derive_seed(seed, t.fit.seed + 0xf17);
  return t;
}

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  /// Enum or other string-mapped field.
  template <class T, class F>
  void read_mapped(const char* key, T& out, F from_string) {
    std::optional<std::string> s;
    read_optional(key, s);
    if (!s) return;
    try {
      out = from_string(*s);
    } catch (const Error& e) {
      fail(key, e.what());
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, join(key));
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) fail(key, "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::parse, "config key '" + join(key) + "': " + what);
  }

  std::string join(const std::string& key) const {
    if (path_.empty()) return key;
    if (key.empty()) return path_;
    return path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_radio(Section s, RadioParams& r) {
  s.read("pathloss_a_db", r.pathloss_a_db);
  s.read("pathloss_b_db", r.pathloss_b_db);
  s.read("noise_dbm_per_hz", r.noise_dbm_per_hz);
  s.read("shadowing_std_db", r.shadowing_std_db);
  s.read("tti_s", r.tti_s);
  s.read("sir_threshold_db", r.sir_threshold_db);
  s.read("joint_transmission", r.joint_transmission);
  s.finish();
}

void read_deployment(Section s, Deployment& d) {
  s.read("clusters", d.clusters);
  s.read("trps_per_cluster", d.trps_per_cluster);
  s.read("trp_spacing_m", d.trp_spacing_m);
  s.read("distance_bins_m", d.distance_bins_m);
  s.read("small_cells", d.small_cells);
  s.read("small_cell_ring_m", d.small_cell_ring_m);
  s.read("macro_power_dbm", d.macro_power_dbm);
  s.read("small_power_dbm", d.small_power_dbm);
  s.read("hotspot_fraction", d.hotspot_fraction);
  s.read("hotspot_radius_m", d.hotspot_radius_m);
  s.read("users_per_cell", d.users_per_cell);
  s.read("cell_user_radius_m", d.cell_user_radius_m);
  s.read("site_distance_m", d.site_distance_m);
  s.read("users", d.users);
  s.read("user_radius_m", d.user_radius_m);
  s.finish();
}

void read_traffic(Section s, TrafficSpec& t) {
  s.read("full_buffer", t.full_buffer);
  if (const json* classes = s.raw("classes")) {
    if (!classes->is_array()) s.fail("classes", "expected an array");
    t.classes.clear();
    for (std::size_t i = 0; i < classes->size(); ++i) {
      Section c((*classes)[i], s.join("classes[" + std::to_string(i) + "]"));
      TrafficClass tc;
      c.read("share", tc.share);
      c.read("packet_bits", tc.packet_bits);
      c.read("arrival_rate", tc.arrival_rate);
      c.finish();
      t.classes.push_back(tc);
    }
  }
  if (auto load = s.child("load")) {
    load->read("period_s", t.load.period_s);
    load->read("multipliers", t.load.multipliers);
    load->finish();
  }
  s.finish();
}

ScenarioSpec read_scenario(Section s) {
  if (!s.has("id")) s.fail("id", "missing");
  ScenarioId id{};
  s.read_mapped("id", id, scenario_id_from_string);
  ScenarioSpec spec = id == ScenarioId::trp_threshold ? ScenarioSpec::trp_threshold()
                      : id == ScenarioId::cio_balance ? ScenarioSpec::cio_balance()
                                                      : ScenarioSpec::power_control();
  s.read("control_interval", spec.control_interval);
  s.read("action_labels", spec.action_labels);
  s.read("action_steps", spec.action_steps);
  s.read_mapped("reward", spec.reward, reward_kind_from_string);
  s.read("param_min", spec.param_min);
  s.read("param_max", spec.param_max);
  s.read("initial_value", spec.initial_value);
  s.read("reward_unit_bps", spec.reward_unit_bps);
  s.read("rate_floor_bps", spec.rate_floor_bps);
  if (auto r = s.child("radio")) read_radio(*r, spec.radio);
  if (auto d = s.child("deployment")) read_deployment(*d, spec.deployment);
  if (auto t = s.child("traffic")) read_traffic(*t, spec.traffic);
  s.finish();
  return spec;
}

BatchMode batch_mode_from_string(const std::string& s) {
  if (s == "full_batch") return BatchMode::full_batch;
  if (s == "mini_batch") return BatchMode::mini_batch;
  throw Error(ErrorCode::parse, "unknown batch mode '" + s + "'");
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "gradient_descent") return Optimizer::gradient_descent;
  if (s == "rprop") return Optimizer::rprop;
  throw Error(ErrorCode::parse, "unknown optimizer '" + s + "'");
}

std::string to_string(BatchMode m) { return m == BatchMode::full_batch ? "full_batch" : "mini_batch"; }
std::string to_string(Optimizer o) { return o == Optimizer::gradient_descent ? "gradient_descent" : "rprop"; }

void read_trainer(Section s, TrainerConfig& t) {
  s.read("gamma", t.gamma);
  s.read("q_iterations", t.q_iterations);
  s.read("parallel", t.parallel);
  s.read_mapped("normalizer", t.normalizer, normalizer_method_from_string);
  if (auto clip = s.child("target_clip")) {
    TargetClip c;
    clip->read("low", c.low);
    clip->read("high", c.high);
    clip->finish();
    t.target_clip = c;
  }
  if (auto f = s.child("fit")) {
    f->read("epochs", t.fit.epochs);
    f->read("learning_rate", t.fit.learning_rate);
    f->read_mapped("batch_mode", t.fit.batch_mode, batch_mode_from_string);
    f->read("batch_size", t.fit.batch_size);
    f->read_mapped("optimizer", t.fit.optimizer, optimizer_from_string);
    f->read("seed", t.fit.seed);
    f->finish();
  }
  if (const json* members = s.raw("ensemble")) {
    if (!members->is_array()) s.fail("ensemble", "expected an array");
    t.ensemble_specs.clear();
    for (std::size_t i = 0; i < members->size(); ++i) {
      Section m((*members)[i], s.join("ensemble[" + std::to_string(i) + "]"));
      NetConfig n;
      n.seed = i + 1;
      m.read("hidden_layers", n.hidden_layers);
      m.read_mapped("activation", n.activation, activation_from_string);
      m.read("seed", n.seed);
      m.finish();
      t.ensemble_specs.push_back(n);
    }
  }
  s.finish();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("config: ") + e.what());
  }
  Section root(j, "");
  ExperimentConfig c;
  if (auto s = root.child("scenario")) {
    c.scenario = read_scenario(*s);
  } else {
    root.fail("scenario", "missing");
  }
  if (auto t = root.child("trainer")) read_trainer(*t, c.trainer);
  if (auto s = root.child("schedule")) {
    s->read("epsilon_start", c.schedule.epsilon_start);
    s->read("epsilon_end", c.schedule.epsilon_end);
    s->read("decay_duration", c.schedule.decay_duration);
    s->read_mapped("shape", c.schedule.shape, decay_shape_from_string);
    s->finish();
  }
  root.read("rounds", c.rounds);
  root.read("episodes_per_round", c.episodes_per_round);
  root.read("episode_duration", c.episode_duration);
  root.read("eval_episodes", c.eval_episodes);
  root.read("seeds", c.seeds);
  root.read("output_dir", c.output_dir);
  root.read("baseline_sweep", c.baseline_sweep);
  root.read_optional("replay_capacity", c.replay_capacity);
  root.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  json classes = json::array();
  for (const auto& tc : s.traffic.classes)
    classes.push_back({{"share", tc.share}, {"packet_bits", tc.packet_bits}, {"arrival_rate", tc.arrival_rate}});
  const auto& d = s.deployment;
  json scenario = {
      {"id", to_string(s.id)},
      {"control_interval", s.control_interval},
      {"action_labels", s.action_labels},
      {"action_steps", s.action_steps},
      {"reward", to_string(s.reward)},
      {"param_min", s.param_min},
      {"param_max", s.param_max},
      {"initial_value", s.initial_value},
      {"reward_unit_bps", s.reward_unit_bps},
      {"rate_floor_bps", s.rate_floor_bps},
      {"radio",
       {{"pathloss_a_db", s.radio.pathloss_a_db},
        {"pathloss_b_db", s.radio.pathloss_b_db},
        {"noise_dbm_per_hz", s.radio.noise_dbm_per_hz},
        {"shadowing_std_db", s.radio.shadowing_std_db},
        {"tti_s", s.radio.tti_s},
        {"sir_threshold_db", s.radio.sir_threshold_db},
        {"joint_transmission", s.radio.joint_transmission}}},
      {"deployment",
       {{"clusters", d.clusters},
        {"trps_per_cluster", d.trps_per_cluster},
        {"trp_spacing_m", d.trp_spacing_m},
        {"distance_bins_m", d.distance_bins_m},
        {"small_cells", d.small_cells},
        {"small_cell_ring_m", d.small_cell_ring_m},
        {"macro_power_dbm", d.macro_power_dbm},
        {"small_power_dbm", d.small_power_dbm},
        {"hotspot_fraction", d.hotspot_fraction},
        {"hotspot_radius_m", d.hotspot_radius_m},
        {"users_per_cell", d.users_per_cell},
        {"cell_user_radius_m", d.cell_user_radius_m},
        {"site_distance_m", d.site_distance_m},
        {"users", d.users},
        {"user_radius_m", d.user_radius_m}}},
      {"traffic",
       {{"full_buffer", s.traffic.full_buffer},
        {"classes", classes},
        {"load", {{"period_s", s.traffic.load.period_s}, {"multipliers", s.traffic.load.multipliers}}}}},
  };
  const auto& t = c.trainer;
  json members = json::array();
  for (const auto& m : t.ensemble_specs)
    members.push_back({{"hidden_layers", m.hidden_layers}, {"activation", to_string(m.activation)}, {"seed", m.seed}});
  json trainer = {
      {"gamma", t.gamma},
      {"q_iterations", t.q_iterations},
      {"parallel", t.parallel},
      {"normalizer", to_string(t.normalizer)},
      {"fit",
       {{"epochs", t.fit.epochs},
        {"learning_rate", t.fit.learning_rate},
        {"batch_mode", to_string(t.fit.batch_mode)},
        {"batch_size", t.fit.batch_size},
        {"optimizer", to_string(t.fit.optimizer)},
        {"seed", t.fit.seed}}},
  };
  if (!members.empty()) trainer["ensemble"] = members;
  if (t.target_clip) trainer["target_clip"] = {{"low", t.target_clip->low}, {"high", t.target_clip->high}};
  json root = {
      {"scenario", scenario},
      {"trainer", trainer},
      {"schedule",
       {{"epsilon_start", c.schedule.epsilon_start},
        {"epsilon_end", c.schedule.epsilon_end},
        {"decay_duration", c.schedule.decay_duration},
        {"shape", to_string(c.schedule.shape)}}},
      {"rounds", c.rounds},
      {"episodes_per_round", c.episodes_per_round},
      {"episode_duration", c.episode_duration},
      {"eval_episodes", c.eval_episodes},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
      {"baseline_sweep", c.baseline_sweep},
  };
  if (c.replay_capacity) root["replay_capacity"] = *c.replay_capacity;
  return root.dump(2);
}

}  // namespace rrm
