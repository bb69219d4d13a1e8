#include "rrm/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rrm {

namespace {

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

double noise_per_rb_mw(const CellNode& c, const RadioParams& p) {
  return db_to_lin(p.noise_dbm_per_hz + lin_to_db(c.rb_bandwidth_hz()));
}

}  // namespace

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double CellNode::power_per_rb_dbm() const { return tx_power_dbm - 10.0 * std::log10(static_cast<double>(rb_count)); }

void RadioParams::validate() const {
  if (!(tti_s > 0.0)) throw Error(ErrorCode::invalid_argument, "tti must be > 0");
  if (!(pathloss_b_db > 0.0)) throw Error(ErrorCode::invalid_argument, "pathloss slope must be > 0");
  if (shadowing_std_db < 0.0) throw Error(ErrorCode::invalid_argument, "shadowing std must be >= 0");
}

double LoadProfile::at(double t) const {
  if (period_s <= 0.0 || multipliers.size() <= 1) return multipliers.empty() ? 1.0 : multipliers.front();
  const auto slot = static_cast<std::size_t>(std::floor(t / period_s)) % multipliers.size();
  return multipliers[slot];
}

double LoadProfile::peak() const {
  return multipliers.empty() ? 1.0 : *std::max_element(multipliers.begin(), multipliers.end());
}

std::vector<double> KpiWindow::active_rates() const {
  std::vector<double> r;
  for (const auto& x : user_rate)
    if (x) r.push_back(*x);
  return r;
}

double pathloss_db(Vec2 tx, Vec2 rx, const RadioParams& params) {
  const double d = std::max(distance(tx, rx), 1.0);
  return params.pathloss_a_db + params.pathloss_b_db * std::log10(d / 1000.0);
}

double sinr_linear(const UserNode& user, std::span<const CellNode> cells, const RadioParams& params,
                   std::span<const double> activity) {
  if (user.serving_set.empty()) throw Error(ErrorCode::invalid_argument, "user is not attached");
  double signal = 0.0, interference = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double rx = db_to_lin(cells[c].power_per_rb_dbm() - pathloss_db(cells[c].position, user.position, params));
    const bool serving = std::find(user.serving_set.begin(), user.serving_set.end(), static_cast<int>(c)) !=
                         user.serving_set.end();
    if (serving)
      signal += rx;
    else
      interference += rx * (activity.empty() ? 1.0 : activity[c]);
  }
  const auto primary = static_cast<std::size_t>(user.serving_set.front());
  return signal / (interference + noise_per_rb_mw(cells[primary], params));
}

namespace {

std::vector<int> attach_by_rsrp(std::span<const double> rsrp, std::span<const CellNode> cells,
                                const RadioParams& params) {
  if (cells.empty()) throw Error(ErrorCode::invalid_argument, "no cells to attach to");
  std::size_t best = 0;
  for (std::size_t c = 1; c < cells.size(); ++c)
    if (rsrp[c] + cells[c].cio_db > rsrp[best] + cells[best].cio_db) best = c;
  std::vector<int> set{static_cast<int>(best)};
  if (params.joint_transmission) {
    const double threshold = cells[best].sir_threshold_db;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == best || cells[c].cluster != cells[best].cluster) continue;
      if (rsrp[c] - rsrp[best] > -threshold) set.push_back(static_cast<int>(c));
    }
  }
  return set;
}

}  // namespace

std::vector<int> attach(const UserNode& user, std::span<const CellNode> cells, const RadioParams& params) {
  std::vector<double> rsrp(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c)
    rsrp[c] = cells[c].reference_power_dbm - 10.0 * std::log10(static_cast<double>(cells[c].rb_count)) -
              pathloss_db(cells[c].position, user.position, params);
  return attach_by_rsrp(rsrp, cells, params);
}

std::optional<double> kpi_harmonic_mean(std::span<const double> rates) {
  double inv = 0.0;
  std::size_t n = 0;
  for (double r : rates) {
    if (r > 0.0) {
      inv += 1.0 / r;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(n) / inv;
}

std::optional<double> kpi_sum_log(std::span<const double> rates) {
  double s = 0.0;
  std::size_t n = 0;
  for (double r : rates) {
    if (r > 0.0) {
      s += std::log(r);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s;
}

std::optional<double> kpi_percentile(std::span<const double> rates, double p) {
  if (rates.empty()) return std::nullopt;
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::invalid_argument, "percentile must lie in [0, 1]");
  std::vector<double> v(rates.begin(), rates.end());
  std::sort(v.begin(), v.end());
  const double idx = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(idx));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::size_t outage_count(std::span<const double> rates) {
  return static_cast<std::size_t>(std::count_if(rates.begin(), rates.end(), [](double r) { return !(r > 0.0); }));
}

// ---------------------------------------------------------------------------
// World

World::World(std::vector<CellNode> cells, std::vector<UserNode> users, RadioParams params, std::uint64_t seed,
             LoadProfile load)
    : cells_(std::move(cells)), users_(std::move(users)), params_(params), load_(std::move(load)) {
  params_.validate();
  if (cells_.empty()) throw Error(ErrorCode::invalid_argument, "world needs at least one cell");
  for (const auto& c : cells_)
    if (c.rb_count < 1) throw Error(ErrorCode::invalid_argument, "rb_count must be >= 1");
  const std::size_t nc = cells_.size(), nu = users_.size();

  gain_.assign(nu, std::vector<double>(nc, 0.0));
  for (std::size_t u = 0; u < nu; ++u) {
    user_rng_.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(u)));
    for (std::size_t c = 0; c < nc; ++c) {
      double loss = pathloss_db(cells_[c].position, users_[u].position, params_);
      if (params_.shadowing_std_db > 0.0) loss += params_.shadowing_std_db * user_rng_[u].normal();
      gain_[u][c] = db_to_lin(-loss);
    }
  }
  activity_.assign(nc, 1.0);
  rb_noise_mw_.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) rb_noise_mw_[c] = noise_per_rb_mw(cells_[c], params_);

  record_.cell_used_rbs.assign(nc, 0.0);
  record_.user_bits.assign(nu, 0.0);
  record_.user_sinr.assign(nu, 0.0);
  w_user_bits_.assign(nu, 0.0);
  w_user_active_.assign(nu, 0.0);
  w_user_sinr_db_.assign(nu, 0.0);
  w_cell_util_.assign(nc, 0.0);
  w_cell_util_sq_.assign(nc, 0.0);
  w_cell_power_.assign(nc, 0.0);

  refresh();
  for (std::size_t u = 0; u < nu; ++u)
    if (users_[u].traffic.kind == TrafficKind::poisson && users_[u].traffic.arrival_rate > 0.0) schedule_arrival(u, 0.0);
}

double World::rsrp_dbm(std::size_t user, std::size_t cell) const {
  const auto& c = cells_.at(cell);
  return c.reference_power_dbm - 10.0 * std::log10(static_cast<double>(c.rb_count)) + lin_to_db(gain_.at(user)[cell]);
}

void World::refresh() {
  rb_power_mw_.resize(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) rb_power_mw_[c] = db_to_lin(cells_[c].power_per_rb_dbm());
  std::vector<double> rsrp(cells_.size());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    for (std::size_t c = 0; c < cells_.size(); ++c) rsrp[c] = rsrp_dbm(u, c);
    users_[u].serving_set = attach_by_rsrp(rsrp, cells_, params_);
  }
}

void World::set_tx_power(std::size_t cell, double dbm) {
  cells_.at(cell).tx_power_dbm = dbm;
  refresh();
}

void World::set_cio(std::size_t cell, double db) {
  cells_.at(cell).cio_db = db;
  refresh();
}

void World::set_sir_threshold(std::size_t cell, double db) {
  cells_.at(cell).sir_threshold_db = db;
  refresh();
}

double World::user_sinr(std::size_t u) const {
  const auto& user = users_.at(u);
  double signal = 0.0, total = 0.0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const double rx = rb_power_mw_[c] * gain_[u][c];
    if (std::find(user.serving_set.begin(), user.serving_set.end(), static_cast<int>(c)) != user.serving_set.end())
      signal += rx;
    else
      total += rx * activity_[c];
  }
  return signal / (total + rb_noise_mw_[static_cast<std::size_t>(user.serving_set.front())]);
}

void World::schedule_arrival(std::size_t u, double after) {
  const double peak_rate = users_[u].traffic.arrival_rate * load_.peak();
  if (!(peak_rate > 0.0)) return;
  double t = after;
  // Thinning keeps the time-varying process exactly Poisson.
  for (;;) {
    t += user_rng_[u].exponential(peak_rate);
    const double accept = users_[u].traffic.arrival_rate * load_.at(t) / peak_rate;
    if (accept >= 1.0 || user_rng_[u].unit() < accept) break;
  }
  events_.push({t, event_seq_++, u});
}

void World::process_arrivals(double until) {
  while (!events_.empty() && events_.top().time < until) {
    const Arrival ev = events_.top();
    events_.pop();
    auto& user = users_[ev.user];
    user.buffer_bits += user.traffic.packet_bits;
    user.arrived_bits += user.traffic.packet_bits;
    ++user.arrivals;
    schedule_arrival(ev.user, ev.time);
  }
}

const TtiRecord& World::step_tti() {
  const double tti = params_.tti_s;
  const std::size_t nc = cells_.size(), nu = users_.size();
  process_arrivals(static_cast<double>(tick_ + 1) * tti);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> bits_per_rb(nu, 0.0), demand(nu, 0.0), granted(nu, kInf);
  std::vector<bool> active(nu, false);
  for (std::size_t u = 0; u < nu; ++u) {
    const double sinr = user_sinr(u);
    record_.user_sinr[u] = sinr;
    const auto primary = static_cast<std::size_t>(users_[u].serving_set.front());
    bits_per_rb[u] = cells_[primary].rb_bandwidth_hz() * tti * std::log2(1.0 + sinr);
    active[u] = users_[u].backlogged();
    demand[u] = users_[u].full_buffer() ? kInf
                : bits_per_rb[u] > 0.0  ? users_[u].buffer_bits / bits_per_rb[u]
                                        : kInf;
  }

  // Equal-share water filling per cell; a jointly served user gets the
  // smallest share among its serving cells.
  std::vector<std::size_t> members;
  for (std::size_t c = 0; c < nc; ++c) {
    members.clear();
    for (std::size_t u = 0; u < nu; ++u) {
      if (!active[u]) continue;
      const auto& s = users_[u].serving_set;
      if (std::find(s.begin(), s.end(), static_cast<int>(c)) != s.end()) members.push_back(u);
    }
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return demand[a] < demand[b]; });
    double remaining = cells_[c].rb_count;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double share = std::min(demand[members[i]], remaining / static_cast<double>(members.size() - i));
      remaining -= share;
      granted[members[i]] = std::min(granted[members[i]], share);
    }
  }

  std::fill(record_.cell_used_rbs.begin(), record_.cell_used_rbs.end(), 0.0);
  for (std::size_t u = 0; u < nu; ++u) {
    auto& user = users_[u];
    double bits = 0.0;
    if (active[u]) {
      bits = granted[u] * bits_per_rb[u];
      if (!user.full_buffer()) {
        bits = std::min(bits, user.buffer_bits);
        user.buffer_bits -= bits;
        if (user.buffer_bits < 1e-9) user.buffer_bits = 0.0;
      }
      user.cumulative_bits += bits;
      user.active_time += tti;
      for (int c : user.serving_set) record_.cell_used_rbs[static_cast<std::size_t>(c)] += granted[u];
      w_user_active_[u] += 1.0;
      w_user_bits_[u] += bits;
      w_user_sinr_db_[u] += lin_to_db(record_.user_sinr[u]);
    }
    record_.user_bits[u] = bits;
  }
  for (std::size_t c = 0; c < nc; ++c) {
    const double util = std::clamp(record_.cell_used_rbs[c] / cells_[c].rb_count, 0.0, 1.0);
    activity_[c] = util;
    w_cell_util_[c] += util;
    w_cell_util_sq_[c] += util * util;
    w_cell_power_[c] += rb_power_mw_[c] * record_.cell_used_rbs[c] * 1e-3;
  }
  ++window_ttis_;
  ++tick_;
  time_ = static_cast<double>(tick_) * tti;
  record_.time = time_;
  return record_;
}

void World::run_for(double seconds) {
  const auto n = static_cast<std::uint64_t>(std::llround(seconds / params_.tti_s));
  for (std::uint64_t i = 0; i < n; ++i) step_tti();
}

KpiWindow World::close_window() {
  if (window_ttis_ == 0) throw Error(ErrorCode::not_ready, "KPI window holds no TTIs");
  const std::size_t nc = cells_.size(), nu = users_.size();
  const double tti = params_.tti_s;
  const double n = static_cast<double>(window_ttis_);
  KpiWindow w;
  w.start = window_start_;
  w.duration = n * tti;
  w.user_rate.resize(nu);
  w.user_sinr_db.resize(nu);
  w.user_primary.resize(nu);
  for (std::size_t u = 0; u < nu; ++u) {
    if (w_user_active_[u] > 0.0) {
      w.user_rate[u] = w_user_bits_[u] / (w_user_active_[u] * tti);
      w.user_sinr_db[u] = w_user_sinr_db_[u] / w_user_active_[u];
    }
    w.user_primary[u] = users_[u].serving_set.front();
  }
  w.cell_utilization.resize(nc);
  w.cell_utilization_var.resize(nc);
  w.cell_power_w.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const double mean = w_cell_util_[c] / n;
    w.cell_utilization[c] = mean;
    w.cell_utilization_var[c] = std::max(0.0, w_cell_util_sq_[c] / n - mean * mean);
    w.cell_power_w[c] = w_cell_power_[c] / n;
  }
  std::fill(w_user_bits_.begin(), w_user_bits_.end(), 0.0);
  std::fill(w_user_active_.begin(), w_user_active_.end(), 0.0);
  std::fill(w_user_sinr_db_.begin(), w_user_sinr_db_.end(), 0.0);
  std::fill(w_cell_util_.begin(), w_cell_util_.end(), 0.0);
  std::fill(w_cell_util_sq_.begin(), w_cell_util_sq_.end(), 0.0);
  std::fill(w_cell_power_.begin(), w_cell_power_.end(), 0.0);
  window_ttis_ = 0;
  window_start_ = time_;
  return w;
}

}  // namespace rrm
