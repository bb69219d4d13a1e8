#pragma once

// Desk-scale downlink cellular simulator.
//
// Cells transmit at a fixed per-RB power (budget spread over all RBs), users
// are static, scheduling is equal-share round robin per TTI with leftover RBs
// redistributed, and rates follow Shannon over the granted bandwidth. Poisson
// packet arrivals are driven by an event queue; everything else advances on
// the TTI clock.

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "rrm/error.hpp"
#include "rrm/rng.hpp"

namespace rrm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

enum class CellLayer { macro, small, trp };

struct CellNode {
  int id = 0;
  Vec2 position;
  double tx_power_dbm = 40.0;         // data power budget
  double reference_power_dbm = 40.0;  // reference-signal power used for RSRP
  double cio_db = 0.0;
  CellLayer layer = CellLayer::macro;
  double bandwidth_hz = 10e6;
  int rb_count = 50;
  double sir_threshold_db = 0.0;  // joint-transmission admission threshold
  int cluster = 0;                // TRPs of one logical cell share a cluster

  double rb_bandwidth_hz() const { return bandwidth_hz / rb_count; }
  double power_per_rb_dbm() const;
};

enum class TrafficKind { full_buffer, poisson };

struct TrafficModel {
  TrafficKind kind = TrafficKind::full_buffer;
  double packet_bits = 0.0;
  double arrival_rate = 0.0;  // packets per second
};

struct UserNode {
  int id = 0;
  Vec2 position;
  TrafficModel traffic;
  double buffer_bits = 0.0;
  std::vector<int> serving_set;  // cell indices, primary first
  double cumulative_bits = 0.0;
  double active_time = 0.0;
  double arrived_bits = 0.0;
  std::size_t arrivals = 0;

  bool full_buffer() const { return traffic.kind == TrafficKind::full_buffer; }
  bool backlogged() const { return full_buffer() || buffer_bits > 0.0; }
};

struct RadioParams {
  double pathloss_a_db = 128.1;
  double pathloss_b_db = 37.6;  // per decade of distance in km
  double noise_dbm_per_hz = -174.0;
  double shadowing_std_db = 0.0;
  double tti_s = 1e-3;
  double sir_threshold_db = 0.0;
  bool joint_transmission = false;

  void validate() const;
};

/// Piecewise-constant multiplier on every Poisson arrival rate.
struct LoadProfile {
  double period_s = 0.0;  // 0 disables modulation
  std::vector<double> multipliers{1.0};

  double at(double t) const;
  double peak() const;
};

/// Aggregates over one KPI window. Rates are bits delivered per second of
/// backlogged time; users without backlog in the window have no rate.
struct KpiWindow {
  double start = 0.0;
  double duration = 0.0;
  std::vector<std::optional<double>> user_rate;
  std::vector<std::optional<double>> user_sinr_db;  // mean over backlogged TTIs
  std::vector<int> user_primary;                   // primary serving cell at close
  std::vector<double> cell_utilization;            // mean RB utilization in [0, 1]
  std::vector<double> cell_utilization_var;        // variance over TTIs
  std::vector<double> cell_power_w;                // mean transmitted power

  /// Rates of users that were backlogged in the window.
  std::vector<double> active_rates() const;
};

struct TtiRecord {
  double time = 0.0;
  std::vector<double> cell_used_rbs;
  std::vector<double> user_bits;
  std::vector<double> user_sinr;  // linear
};

double pathloss_db(Vec2 tx, Vec2 rx, const RadioParams& params);

/// Linear SINR of a user: serving-set power summed over interference from
/// every other cell (scaled by its activity factor, default 1) plus noise
/// over one RB. Shadowing is not applied here.
double sinr_linear(const UserNode& user, std::span<const CellNode> cells, const RadioParams& params,
                   std::span<const double> activity = {});

/// Serving set: argmax of RSRP + CIO (lowest index on ties). With joint
/// transmission enabled, every other TRP of the best cell's cluster whose
/// RSRP is within the best cell's sir_threshold joins.
std::vector<int> attach(const UserNode& user, std::span<const CellNode> cells, const RadioParams& params);

/// Harmonic mean of the positive rates; zero rates are left out (see
/// outage_count). Empty -> nullopt.
std::optional<double> kpi_harmonic_mean(std::span<const double> rates);
/// Sum of natural logs of the positive rates; empty -> nullopt.
std::optional<double> kpi_sum_log(std::span<const double> rates);
/// Linear-interpolated quantile with index p * (n - 1); empty -> nullopt.
std::optional<double> kpi_percentile(std::span<const double> rates, double p);
std::size_t outage_count(std::span<const double> rates);

class World {
 public:
  World(std::vector<CellNode> cells, std::vector<UserNode> users, RadioParams params, std::uint64_t seed,
        LoadProfile load = {});

  double sim_time() const { return time_; }
  const RadioParams& params() const { return params_; }
  std::span<const CellNode> cells() const { return cells_; }
  std::span<const UserNode> users() const { return users_; }
  const CellNode& cell(std::size_t i) const { return cells_.at(i); }

  /// Mutators re-derive cached powers and serving sets.
  void set_tx_power(std::size_t cell, double dbm);
  void set_cio(std::size_t cell, double db);
  void set_sir_threshold(std::size_t cell, double db);

  /// RSRP in dBm including shadowing.
  double rsrp_dbm(std::size_t user, std::size_t cell) const;
  double user_sinr(std::size_t user) const;

  const TtiRecord& step_tti();
  void run_for(double seconds);

  /// Returns the KPIs accumulated since the previous close and starts a
  /// new window.
  KpiWindow close_window();
  bool window_empty() const { return window_ttis_ == 0; }

 private:
  void refresh();
  void schedule_arrival(std::size_t user, double after);
  void process_arrivals(double until);

  std::vector<CellNode> cells_;
  std::vector<UserNode> users_;
  RadioParams params_;
  LoadProfile load_;
  std::vector<SplitMix> user_rng_;
  double time_ = 0.0;
  std::uint64_t tick_ = 0;

  std::vector<std::vector<double>> gain_;  // [user][cell], linear
  std::vector<double> rb_power_mw_;
  std::vector<double> rb_noise_mw_;
  std::vector<double> activity_;

  struct Arrival {
    double time;
    std::uint64_t seq;
    std::size_t user;
    bool operator>(const Arrival& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> events_;
  std::uint64_t event_seq_ = 0;

  TtiRecord record_;

  double window_start_ = 0.0;
  std::uint64_t window_ttis_ = 0;
  std::vector<double> w_user_bits_, w_user_active_, w_user_sinr_db_;
  std::vector<double> w_cell_util_, w_cell_util_sq_, w_cell_power_;
};

}  // namespace rrm
