#pragma once

// Binds the simulator to three control tasks: per-cluster joint-transmission
// threshold selection, small-cell CIO load balancing and turn-taking
// downlink power control.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrm/agent.hpp"
#include "rrm/replay.hpp"
#include "rrm/simnet.hpp"

namespace rrm {

enum class ScenarioId { trp_threshold, cio_balance, power_control };
enum class RewardKind { harmonic_mean, sum_log, cell_edge_rate };

std::string to_string(ScenarioId id);
ScenarioId scenario_id_from_string(const std::string& s);
std::string to_string(RewardKind r);
RewardKind reward_kind_from_string(const std::string& s);

struct TrafficClass {
  double share = 1.0;  // fraction of users in this class
  double packet_bits = 1e6;
  double arrival_rate = 1.0;
};

struct TrafficSpec {
  bool full_buffer = true;
  std::vector<TrafficClass> classes;
  LoadProfile load;
};

/// Geometry and population of the generated world. Fields not used by a
/// scenario are ignored.
struct Deployment {
  // trp_threshold: clusters of TRPs on a line
  std::size_t clusters = 2;
  std::size_t trps_per_cluster = 3;
  double trp_spacing_m = 150.0;
  std::vector<double> distance_bins_m{40.0, 80.0, 120.0};
  // cio_balance: one macro with small cells on a ring
  std::size_t small_cells = 4;
  double small_cell_ring_m = 250.0;
  double macro_power_dbm = 46.0;
  double small_power_dbm = 30.0;
  double hotspot_fraction = 0.6;
  double hotspot_radius_m = 60.0;
  // power_control: cells on a line, users per cell
  std::vector<std::size_t> users_per_cell{3, 7};
  std::vector<double> cell_user_radius_m;  // per-cell drop radius; empty uses user_radius_m
  double site_distance_m = 400.0;
  // shared
  std::size_t users = 30;
  double user_radius_m = 200.0;
};

struct ScenarioSpec {
  ScenarioId id = ScenarioId::power_control;
  double control_interval = 0.1;
  std::vector<std::string> action_labels{"down", "hold", "up"};
  std::vector<double> action_steps{-1.0, 0.0, 1.0};  // dB applied to the controlled parameter
  RewardKind reward = RewardKind::harmonic_mean;
  double param_min = 10.0;
  double param_max = 40.0;
  double initial_value = 40.0;
  double reward_unit_bps = 1e6;   // rewards are expressed in this unit
  double rate_floor_bps = 1e3;    // applied inside rewards only
  RadioParams radio;
  Deployment deployment;
  TrafficSpec traffic;

  void validate() const;
  std::size_t action_count() const { return action_labels.size(); }
  std::size_t hold_action() const;
  std::vector<std::string> feature_names() const;
  std::size_t feature_dim() const { return feature_names().size(); }
  std::size_t agent_count() const;
  bool turn_taking() const { return id == ScenarioId::power_control; }

  /// Defaults for each task.
  static ScenarioSpec trp_threshold();
  static ScenarioSpec cio_balance();
  static ScenarioSpec power_control();
};

/// Fresh user drop and initial parameters for one episode.
World make_world(const ScenarioSpec& spec, std::uint64_t seed);

/// Cells whose parameter the given agent controls.
std::vector<std::size_t> controlled_cells(const ScenarioSpec& spec, const World& world, std::size_t agent);
double controlled_value(const ScenarioSpec& spec, const World& world, std::size_t agent);

std::vector<double> build_state(const ScenarioSpec& spec, const World& world, const KpiWindow& window,
                                std::size_t agent);
void apply_action(const ScenarioSpec& spec, World& world, std::size_t agent, std::size_t action);
/// Reward over a closed window, or nullopt when the KPI is undefined (no
/// backlogged users in scope).
std::optional<double> compute_reward(const ScenarioSpec& spec, const World& world, const KpiWindow& window,
                                     std::size_t agent);

/// Network-wide KPIs of one closed window.
struct WindowKpi {
  double time = 0.0;  // window end
  std::optional<double> harmonic_mean_bps;
  std::optional<double> p5_bps;
  std::optional<double> median_bps;
  std::optional<double> sum_log;  // of rates in reward units
  double power_w = 0.0;           // total transmitted power
  std::size_t outage = 0;
};
WindowKpi summarize_window(const ScenarioSpec& spec, const KpiWindow& window);

struct EpisodeRecord {
  double sim_time = 0.0;  // decision time
  std::string agent_id;
  std::size_t action = 0;
  double reward = 0.0;
  double param = 0.0;  // controlled value after the action
  WindowKpi kpi;       // the window the reward was computed over
};

struct EpisodeMetrics {
  std::vector<EpisodeRecord> records;
  std::vector<WindowKpi> windows;
  std::vector<std::size_t> actions_per_agent;

  double mean_reward() const;
  double mean_harmonic_mean_bps() const;
  double mean_p5_bps() const;
  double mean_median_bps() const;
  double mean_power_w() const;
};

/// Warms the world up for one control interval, then runs `duration`
/// seconds of decisions. agents[i] drives agent slot i. Closed transitions
/// go to `sink` when one is given.
EpisodeMetrics run_episode(const ScenarioSpec& spec, World& world, std::span<Agent> agents, double duration,
                           ReplaySink* sink);

/// Single-member policy that always prefers the hold action.
std::shared_ptr<const Policy> make_hold_policy(const ScenarioSpec& spec);

}  // namespace rrm
