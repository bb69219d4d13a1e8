#include "rrm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rrm {

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::trp_threshold: return "trp_threshold";
    case ScenarioId::cio_balance: return "cio_balance";
    case ScenarioId::power_control: return "power_control";
  }
  return "?";
}

ScenarioId scenario_id_from_string(const std::string& s) {
  if (s == "trp_threshold") return ScenarioId::trp_threshold;
  if (s == "cio_balance") return ScenarioId::cio_balance;
  if (s == "power_control") return ScenarioId::power_control;
  throw Error(ErrorCode::parse, "unknown scenario '" + s + "'");
}

std::string to_string(RewardKind r) {
  switch (r) {
    case RewardKind::harmonic_mean: return "harmonic_mean";
    case RewardKind::sum_log: return "sum_log";
    case RewardKind::cell_edge_rate: return "cell_edge_rate";
  }
  return "?";
}

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "harmonic_mean") return RewardKind::harmonic_mean;
  if (s == "sum_log") return RewardKind::sum_log;
  if (s == "cell_edge_rate") return RewardKind::cell_edge_rate;
  throw Error(ErrorCode::parse, "unknown reward '" + s + "'");
}

// ---------------------------------------------------------------------------
// ScenarioSpec

void ScenarioSpec::validate() const {
  if (!(control_interval > 0.0)) throw Error(ErrorCode::invalid_argument, "control_interval must be > 0");
  if (action_labels.size() < 2) throw Error(ErrorCode::invalid_argument, "a scenario needs at least two actions");
  if (action_steps.size() != action_labels.size())
    throw Error(ErrorCode::invalid_argument, "action_steps and action_labels differ in length");
  if (!(param_min <= param_max)) throw Error(ErrorCode::invalid_argument, "param_min must be <= param_max");
  if (initial_value < param_min || initial_value > param_max)
    throw Error(ErrorCode::invalid_argument, "initial_value outside [param_min, param_max]");
  if (!(reward_unit_bps > 0.0) || !(rate_floor_bps > 0.0))
    throw Error(ErrorCode::invalid_argument, "reward unit and rate floor must be > 0");
  radio.validate();
  const double ticks = control_interval / radio.tti_s;
  if (std::abs(ticks - std::round(ticks)) > 1e-6)
    throw Error(ErrorCode::invalid_argument, "control_interval must be a whole number of TTIs");
  if (!traffic.full_buffer && traffic.classes.empty())
    throw Error(ErrorCode::invalid_argument, "Poisson traffic needs at least one class");
  if (agent_count() == 0) throw Error(ErrorCode::invalid_argument, "scenario has no agents");
  if (!deployment.cell_user_radius_m.empty() &&
      deployment.cell_user_radius_m.size() != deployment.users_per_cell.size())
    throw Error(ErrorCode::invalid_argument, "cell_user_radius_m needs one radius per cell");
  if (id == ScenarioId::trp_threshold && deployment.distance_bins_m.size() != 3)
    throw Error(ErrorCode::invalid_argument, "trp_threshold uses exactly three distance bin edges");
}

std::size_t ScenarioSpec::hold_action() const {
  for (std::size_t a = 0; a < action_steps.size(); ++a)
    if (action_steps[a] == 0.0) return a;
  throw Error(ErrorCode::invalid_argument, "scenario has no hold action");
}

std::vector<std::string> ScenarioSpec::feature_names() const {
  switch (id) {
    case ScenarioId::trp_threshold:
      return {"trp_util_mean", "trp_util_var", "users_bin0", "users_bin1", "users_bin2", "users_bin3",
              "sir_threshold_db"};
    case ScenarioId::cio_balance: return {"own_util", "macro_util", "cio_db"};
    case ScenarioId::power_control: return {"own_power_dbm", "mean_sinr_db", "sum_rate_mbps", "other_power_dbm"};
  }
  return {};
}

std::size_t ScenarioSpec::agent_count() const {
  switch (id) {
    case ScenarioId::trp_threshold: return deployment.clusters;
    case ScenarioId::cio_balance: return deployment.small_cells;
    case ScenarioId::power_control: return deployment.users_per_cell.size();
  }
  return 0;
}

ScenarioSpec ScenarioSpec::trp_threshold() {
  ScenarioSpec s;
  s.id = ScenarioId::trp_threshold;
  s.reward = RewardKind::harmonic_mean;
  s.param_min = 0.0;
  s.param_max = 12.0;
  s.initial_value = 3.0;
  s.radio.joint_transmission = true;
  s.deployment.users = 30;
  s.deployment.user_radius_m = 100.0;
  s.traffic.full_buffer = false;
  s.traffic.classes = {{0.7, 0.2e6, 10.0}, {0.3, 4e6, 3.0}};
  s.traffic.load.period_s = 10.0;
  s.traffic.load.multipliers = {0.5, 2.0};
  return s;
}

ScenarioSpec ScenarioSpec::cio_balance() {
  ScenarioSpec s;
  s.id = ScenarioId::cio_balance;
  s.reward = RewardKind::cell_edge_rate;
  s.param_min = 0.0;
  s.param_max = 9.0;
  s.initial_value = 0.0;
  s.deployment.users = 30;
  s.deployment.user_radius_m = 400.0;
  return s;
}

ScenarioSpec ScenarioSpec::power_control() {
  ScenarioSpec s;
  s.id = ScenarioId::power_control;
  s.reward = RewardKind::harmonic_mean;
  // A compact lightly loaded cell next to a wide busy one.
  s.deployment.users_per_cell = {3, 7};
  s.deployment.cell_user_radius_m = {100.0, 250.0};
  s.param_min = 10.0;
  s.param_max = 40.0;
  s.initial_value = 40.0;
  return s;
}

// ---------------------------------------------------------------------------
// World construction

namespace {

Vec2 uniform_in_disc(SplitMix& rng, Vec2 center, double radius) {
  const double r = radius * std::sqrt(rng.unit());
  const double a = 2.0 * std::numbers::pi * rng.unit();
  return {center.x + r * std::cos(a), center.y + r * std::sin(a)};
}

TrafficModel draw_traffic(const TrafficSpec& t, SplitMix& rng) {
  if (t.full_buffer) return {};
  double total = 0.0;
  for (const auto& c : t.classes) total += c.share;
  double u = rng.unit() * total;
  const TrafficClass* pick = &t.classes.back();
  for (const auto& c : t.classes) {
    if (u < c.share) {
      pick = &c;
      break;
    }
    u -= c.share;
  }
  return {TrafficKind::poisson, pick->packet_bits, pick->arrival_rate};
}

CellNode make_cell(int id, Vec2 pos, double power_dbm, CellLayer layer, int cluster) {
  CellNode c;
  c.id = id;
  c.position = pos;
  c.tx_power_dbm = power_dbm;
  c.reference_power_dbm = power_dbm;
  c.layer = layer;
  c.cluster = cluster;
  return c;
}

}  // namespace

World make_world(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  SplitMix rng(derive_seed(seed, 0x5eed));
  const auto& d = spec.deployment;
  std::vector<CellNode> cells;
  std::vector<UserNode> users;
  auto add_user = [&](Vec2 pos) {
    UserNode u;
    u.id = static_cast<int>(users.size());
    u.position = pos;
    u.traffic = draw_traffic(spec.traffic, rng);
    users.push_back(u);
  };

  switch (spec.id) {
    case ScenarioId::trp_threshold: {
      const double cluster_width = static_cast<double>(d.trps_per_cluster) * d.trp_spacing_m;
      for (std::size_t k = 0; k < d.clusters; ++k) {
        const double center = static_cast<double>(k) * cluster_width;
        for (std::size_t j = 0; j < d.trps_per_cluster; ++j) {
          const double x = center + (static_cast<double>(j) - (static_cast<double>(d.trps_per_cluster) - 1) / 2.0) *
                                        d.trp_spacing_m;
          auto c = make_cell(static_cast<int>(cells.size()), {x, 0.0}, d.small_power_dbm, CellLayer::trp,
                             static_cast<int>(k));
          c.sir_threshold_db = spec.initial_value;
          cells.push_back(c);
        }
      }
      for (std::size_t i = 0; i < d.users; ++i) {
        const auto& anchor = cells[rng.index(cells.size())];
        add_user(uniform_in_disc(rng, anchor.position, d.user_radius_m));
      }
      break;
    }
    case ScenarioId::cio_balance: {
      cells.push_back(make_cell(0, {0.0, 0.0}, d.macro_power_dbm, CellLayer::macro, 0));
      for (std::size_t i = 0; i < d.small_cells; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(d.small_cells);
        auto c = make_cell(static_cast<int>(i + 1), {d.small_cell_ring_m * std::cos(a), d.small_cell_ring_m * std::sin(a)},
                           d.small_power_dbm, CellLayer::small, static_cast<int>(i + 1));
        c.cio_db = spec.initial_value;
        cells.push_back(c);
      }
      for (std::size_t i = 0; i < d.users; ++i) {
        if (rng.unit() < d.hotspot_fraction) {
          const auto& sc = cells[1 + rng.index(d.small_cells)];
          add_user(uniform_in_disc(rng, sc.position, d.hotspot_radius_m));
        } else {
          add_user(uniform_in_disc(rng, {0.0, 0.0}, d.user_radius_m));
        }
      }
      break;
    }
    case ScenarioId::power_control: {
      for (std::size_t i = 0; i < d.users_per_cell.size(); ++i)
        cells.push_back(make_cell(static_cast<int>(i), {static_cast<double>(i) * d.site_distance_m, 0.0},
                                  spec.initial_value, CellLayer::small, static_cast<int>(i)));
      for (std::size_t i = 0; i < d.users_per_cell.size(); ++i)
        for (std::size_t n = 0; n < d.users_per_cell[i]; ++n) {
          const double radius = d.cell_user_radius_m.empty() ? d.user_radius_m : d.cell_user_radius_m[i];
          add_user(uniform_in_disc(rng, cells[i].position, radius));
        }
      break;
    }
  }
  return World(std::move(cells), std::move(users), spec.radio, derive_seed(seed, 0xa11), spec.traffic.load);
}

std::vector<std::size_t> controlled_cells(const ScenarioSpec& spec, const World& world, std::size_t agent) {
  if (agent >= spec.agent_count()) throw Error(ErrorCode::invalid_argument, "agent index out of range");
  std::vector<std::size_t> out;
  switch (spec.id) {
    case ScenarioId::trp_threshold:
      for (std::size_t c = 0; c < world.cells().size(); ++c)
        if (world.cell(c).cluster == static_cast<int>(agent)) out.push_back(c);
      break;
    case ScenarioId::cio_balance: out.push_back(agent + 1); break;
    case ScenarioId::power_control: out.push_back(agent); break;
  }
  return out;
}

double controlled_value(const ScenarioSpec& spec, const World& world, std::size_t agent) {
  const auto& c = world.cell(controlled_cells(spec, world, agent).front());
  switch (spec.id) {
    case ScenarioId::trp_threshold: return c.sir_threshold_db;
    case ScenarioId::cio_balance: return c.cio_db;
    case ScenarioId::power_control: return c.tx_power_dbm;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// State, action, reward

namespace {

void check_window(const ScenarioSpec& spec, const World& world, const KpiWindow& w) {
  if (w.duration + 1e-9 < spec.control_interval || w.user_rate.size() != world.users().size() ||
      w.cell_utilization.size() != world.cells().size())
    throw Error(ErrorCode::not_ready, "KPI window is incomplete");
}

bool in_cells(int c, const std::vector<std::size_t>& cells) {
  return std::find(cells.begin(), cells.end(), static_cast<std::size_t>(c)) != cells.end();
}

// Users an agent's reward and state are computed over.
std::vector<std::size_t> users_in_scope(const ScenarioSpec& spec, const World& world, const KpiWindow& w,
                                        std::size_t agent) {
  std::vector<std::size_t> out;
  const auto own = controlled_cells(spec, world, agent);
  for (std::size_t u = 0; u < w.user_rate.size(); ++u) {
    if (!w.user_rate[u]) continue;
    switch (spec.id) {
      case ScenarioId::trp_threshold:
      case ScenarioId::power_control:
        if (spec.id == ScenarioId::power_control && spec.reward != RewardKind::cell_edge_rate) {
          out.push_back(u);  // network-wide
        } else if (in_cells(w.user_primary[u], own)) {
          out.push_back(u);
        }
        break;
      case ScenarioId::cio_balance: {
        // The small cell's neighborhood: users whose strongest small cell it
        // is, whether they are served by it or by the macro.
        std::size_t best = 1;
        for (std::size_t c = 2; c < world.cells().size(); ++c)
          if (world.rsrp_dbm(u, c) > world.rsrp_dbm(u, best)) best = c;
        if (best == own.front() && (w.user_primary[u] == 0 || in_cells(w.user_primary[u], own))) out.push_back(u);
        break;
      }
    }
  }
  return out;
}

// Per-cell partial sums exchanged between power-control agents.
struct CellAggregate {
  double inverse_sum = 0.0;
  double log_sum = 0.0;
  std::size_t count = 0;
};

}  // namespace

std::vector<double> build_state(const ScenarioSpec& spec, const World& world, const KpiWindow& window,
                                std::size_t agent) {
  check_window(spec, world, window);
  const auto own = controlled_cells(spec, world, agent);
  switch (spec.id) {
    case ScenarioId::trp_threshold: {
      double mean = 0.0;
      for (auto c : own) mean += window.cell_utilization[c];
      mean /= static_cast<double>(own.size());
      double var = 0.0;
      for (auto c : own) var += (window.cell_utilization[c] - mean) * (window.cell_utilization[c] - mean);
      var /= static_cast<double>(own.size());
      std::vector<double> bins(4, 0.0);
      const auto& edges = spec.deployment.distance_bins_m;
      for (std::size_t u = 0; u < window.user_rate.size(); ++u) {
        if (!window.user_rate[u] || !in_cells(window.user_primary[u], own)) continue;
        double dist = std::numeric_limits<double>::infinity();
        for (auto c : own) dist = std::min(dist, distance(world.users()[u].position, world.cell(c).position));
        const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), dist) - edges.begin());
        bins[bin] += 1.0;
      }
      return {mean, var, bins[0], bins[1], bins[2], bins[3], world.cell(own.front()).sir_threshold_db};
    }
    case ScenarioId::cio_balance: {
      const auto c = own.front();
      return {window.cell_utilization[c], window.cell_utilization[0], world.cell(c).cio_db};
    }
    case ScenarioId::power_control: {
      const auto c = own.front();
      double sinr_sum = 0.0, rate_sum = 0.0;
      std::size_t n = 0;
      for (std::size_t u = 0; u < window.user_rate.size(); ++u) {
        if (!window.user_rate[u] || window.user_primary[u] != static_cast<int>(c)) continue;
        sinr_sum += *window.user_sinr_db[u];
        rate_sum += *window.user_rate[u] / spec.reward_unit_bps;
        ++n;
      }
      double other = 0.0;
      for (std::size_t k = 0; k < world.cells().size(); ++k)
        if (k != c) other += world.cell(k).tx_power_dbm;
      if (world.cells().size() > 1) other /= static_cast<double>(world.cells().size() - 1);
      return {world.cell(c).tx_power_dbm, n ? sinr_sum / static_cast<double>(n) : 0.0, rate_sum, other};
    }
  }
  return {};
}

void apply_action(const ScenarioSpec& spec, World& world, std::size_t agent, std::size_t action) {
  if (action >= spec.action_count())
    throw Error(ErrorCode::invalid_argument, "action " + std::to_string(action) + " out of range");
  const double step = spec.action_steps[action];
  if (step == 0.0) return;
  const double value = std::clamp(controlled_value(spec, world, agent) + step, spec.param_min, spec.param_max);
  for (auto c : controlled_cells(spec, world, agent)) {
    switch (spec.id) {
      case ScenarioId::trp_threshold: world.set_sir_threshold(c, value); break;
      case ScenarioId::cio_balance: world.set_cio(c, value); break;
      case ScenarioId::power_control: world.set_tx_power(c, value); break;
    }
  }
}

std::optional<double> compute_reward(const ScenarioSpec& spec, const World& world, const KpiWindow& window,
                                     std::size_t agent) {
  check_window(spec, world, window);
  const auto scope = users_in_scope(spec, world, window, agent);
  if (scope.empty()) return std::nullopt;
  auto floored = [&](std::size_t u) { return std::max(*window.user_rate[u], spec.rate_floor_bps) / spec.reward_unit_bps; };

  if (spec.id == ScenarioId::power_control && spec.reward != RewardKind::cell_edge_rate) {
    std::vector<CellAggregate> per_cell(world.cells().size());
    for (auto u : scope) {
      auto& agg = per_cell[static_cast<std::size_t>(window.user_primary[u])];
      const double r = floored(u);
      agg.inverse_sum += 1.0 / r;
      agg.log_sum += std::log(r);
      ++agg.count;
    }
    CellAggregate total;
    for (const auto& agg : per_cell) {
      total.inverse_sum += agg.inverse_sum;
      total.log_sum += agg.log_sum;
      total.count += agg.count;
    }
    if (spec.reward == RewardKind::sum_log) return total.log_sum;
    return static_cast<double>(total.count) / total.inverse_sum;
  }

  std::vector<double> rates;
  rates.reserve(scope.size());
  for (auto u : scope) rates.push_back(floored(u));
  switch (spec.reward) {
    case RewardKind::harmonic_mean: return kpi_harmonic_mean(rates);
    case RewardKind::sum_log: return kpi_sum_log(rates);
    case RewardKind::cell_edge_rate: return kpi_percentile(rates, 0.05);
  }
  return std::nullopt;
}

WindowKpi summarize_window(const ScenarioSpec& spec, const KpiWindow& window) {
  WindowKpi k;
  k.time = window.start + window.duration;
  const auto rates = window.active_rates();
  k.harmonic_mean_bps = kpi_harmonic_mean(rates);
  k.p5_bps = kpi_percentile(rates, 0.05);
  k.median_bps = kpi_percentile(rates, 0.5);
  std::vector<double> scaled;
  for (double r : rates) scaled.push_back(r / spec.reward_unit_bps);
  k.sum_log = kpi_sum_log(scaled);
  for (double p : window.cell_power_w) k.power_w += p;
  k.outage = outage_count(rates);
  return k;
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

double mean_of(const std::vector<WindowKpi>& ws, std::optional<double> WindowKpi::*field) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& w : ws)
    if (w.*field) {
      s += *(w.*field);
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double EpisodeMetrics::mean_reward() const {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& r : records) s += r.reward;
  return s / static_cast<double>(records.size());
}

double EpisodeMetrics::mean_harmonic_mean_bps() const { return mean_of(windows, &WindowKpi::harmonic_mean_bps); }
double EpisodeMetrics::mean_p5_bps() const { return mean_of(windows, &WindowKpi::p5_bps); }
double EpisodeMetrics::mean_median_bps() const { return mean_of(windows, &WindowKpi::median_bps); }

double EpisodeMetrics::mean_power_w() const {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& w : windows) s += w.power_w;
  return s / static_cast<double>(windows.size());
}

EpisodeMetrics run_episode(const ScenarioSpec& spec, World& world, std::span<Agent> agents, double duration,
                           ReplaySink* sink) {
  spec.validate();
  if (agents.size() != spec.agent_count())
    throw Error(ErrorCode::invalid_argument, "scenario expects " + std::to_string(spec.agent_count()) + " agents, got " +
                                                 std::to_string(agents.size()));
  EpisodeMetrics m;
  m.actions_per_agent.assign(agents.size(), 0);

  world.run_for(spec.control_interval);
  KpiWindow window = world.close_window();
  const double t0 = world.sim_time();
  const auto boundaries = static_cast<std::size_t>(std::llround(duration / spec.control_interval));

  // The transition closed at the current boundary needs the KPI of the
  // window it spanned, which doubles as the record's KPI row.
  for (std::size_t k = 0; k < boundaries; ++k) {
    const double now = world.sim_time();
    if (k > 0) {
      window = world.close_window();
      const WindowKpi kpi = summarize_window(spec, window);
      m.windows.push_back(kpi);
      for (std::size_t i = 0; i < agents.size(); ++i) {
        if (!agents[i].has_pending()) continue;
        const auto reward = compute_reward(spec, world, window, i);
        if (!reward) {
          agents[i].discard_pending();
          continue;
        }
        const auto next = build_state(spec, world, window, i);
        Transition t = agents[i].observe(*reward, next, false, now);
        m.records.push_back({t.sim_time, t.agent_id, t.action, t.reward, controlled_value(spec, world, i), kpi});
        if (sink) sink->append(std::move(t));
      }
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (spec.turn_taking() && k % agents.size() != i) continue;
      const auto state = build_state(spec, world, window, i);
      const std::size_t a = agents[i].select_action(state, now - t0);
      apply_action(spec, world, i, a);
      ++m.actions_per_agent[i];
    }
    world.run_for(spec.control_interval);
  }
  if (boundaries > 0) m.windows.push_back(summarize_window(spec, world.close_window()));
  return m;
}

std::shared_ptr<const Policy> make_hold_policy(const ScenarioSpec& spec) {
  NetConfig cfg;
  cfg.input_dim = spec.feature_dim();
  cfg.hidden_layers = {1};
  cfg.output_dim = spec.action_count();
  QEnsemble ens;
  ens.members.push_back({cfg, init_weights(cfg).zeros_like()});
  ens.members.front().weights.layers.back().bias(static_cast<Eigen::Index>(spec.hold_action())) = 1.0;
  ens.normalizer = Normalizer::identity(cfg.input_dim);
  ens.action_count = cfg.output_dim;
  auto p = std::make_shared<Policy>();
  p->ensemble = std::move(ens);
  p->action_labels = spec.action_labels;
  p->schedule = {0.0, 0.0, 1.0, DecayShape::linear};
  p->version = 1;
  p->validate();
  return p;
}

}  // namespace rrm
