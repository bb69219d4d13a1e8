#include "rrm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rrm/policy_io.hpp"

namespace rrm {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Header-keyed CSV reader for the files written here (no quoting).
class CsvTable {
 public:
  explicit CsvTable(const std::string& text, const std::string& what) : what_(what) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::parse, what_ + ": missing header row");
    auto names = split(line);
    for (std::size_t i = 0; i < names.size(); ++i) columns_[names[i]] = i;
    std::size_t n = 1;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != names.size())
        throw Error(ErrorCode::parse, what_ + " line " + std::to_string(n) + ": expected " +
                                          std::to_string(names.size()) + " fields");
      rows_.push_back(std::move(cells));
      lines_.push_back(n);
    }
  }

  std::size_t size() const { return rows_.size(); }

  double number(std::size_t row, const std::string& column) const {
    const std::string& cell = rows_[row][index(column)];
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0')
      throw Error(ErrorCode::parse, what_ + " line " + std::to_string(lines_[row]) + ": column '" + column +
                                        "' is not a number");
    return v;
  }

  std::uint64_t integer(std::size_t row, const std::string& column) const {
    const std::string& cell = rows_[row][index(column)];
    char* end = nullptr;
    const unsigned long long v = std::strtoull(cell.c_str(), &end, 10);
    if (cell.empty() || *end != '\0')
      throw Error(ErrorCode::parse, what_ + " line " + std::to_string(lines_[row]) + ": column '" + column +
                                        "' is not an integer");
    return v;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::size_t index(const std::string& column) const {
    auto it = columns_.find(column);
    if (it == columns_.end()) throw Error(ErrorCode::parse, what_ + ": missing column '" + column + "'");
    return it->second;
  }

  std::string what_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

const char* kMetricsHeader =
    "phase,round,episode,sim_time,agent_id,action,reward,param,harmonic_mean_bps,p5_bps,median_bps,sum_log,power_w,"
    "outage\n";

void append_metrics(std::string& out, const char* phase, std::size_t round, std::size_t episode,
                    const EpisodeMetrics& m) {
  for (const auto& r : m.records) {
    out += phase;
    out += ',' + std::to_string(round) + ',' + std::to_string(episode) + ',' + num(r.sim_time) + ',' + r.agent_id +
           ',' + std::to_string(r.action) + ',' + num(r.reward) + ',' + num(r.param) + ',' +
           opt_num(r.kpi.harmonic_mean_bps) + ',' + opt_num(r.kpi.p5_bps) + ',' + opt_num(r.kpi.median_bps) + ',' +
           opt_num(r.kpi.sum_log) + ',' + num(r.kpi.power_w) + ',' + std::to_string(r.kpi.outage) + '\n';
  }
}

std::uint64_t eval_world_seed(std::uint64_t seed, std::size_t episode) { return derive_seed(seed, 0xe0a1 + episode); }

// Episode e of every round runs on the same user drop, so per-round rewards
// form a comparable learning curve.
std::uint64_t collect_world_seed(std::uint64_t seed, std::size_t episode) { return derive_seed(seed, 0xc011 + episode); }

std::vector<Agent> make_agents(const ScenarioSpec& spec, const std::string& prefix,
                               const std::shared_ptr<const Policy>& policy, std::uint64_t world_seed) {
  std::vector<Agent> agents;
  for (std::size_t i = 0; i < spec.agent_count(); ++i)
    agents.emplace_back(prefix + ".cell" + std::to_string(i), policy, derive_seed(world_seed, 0xa9e + i));
  return agents;
}

// Means over greedy evaluation episodes.
struct EvalKpi {
  double reward = 0.0, harmonic_mean_bps = 0.0, p5_bps = 0.0, median_bps = 0.0, power_w = 0.0;
};

EvalKpi evaluate(const ExperimentConfig& config, const ScenarioSpec& spec, const std::shared_ptr<const Policy>& policy,
                 std::uint64_t seed, const std::string& id_prefix, std::string* metrics, std::size_t round) {
  EvalKpi k;
  const std::size_t n = std::max<std::size_t>(config.eval_episodes, 1);
  for (std::size_t e = 0; e < n; ++e) {
    const std::uint64_t ws = eval_world_seed(seed, e);
    World world = make_world(spec, ws);
    auto agents = make_agents(spec, id_prefix + ".e" + std::to_string(e), policy, ws);
    for (auto& a : agents) a.set_epsilon_override(0.0);
    const auto m = run_episode(spec, world, agents, config.episode_duration, nullptr);
    if (metrics) append_metrics(*metrics, "eval", round, e, m);
    k.reward += m.mean_reward();
    k.harmonic_mean_bps += m.mean_harmonic_mean_bps();
    k.p5_bps += m.mean_p5_bps();
    k.median_bps += m.mean_median_bps();
    k.power_w += m.mean_power_w();
  }
  const double d = static_cast<double>(n);
  return {k.reward / d, k.harmonic_mean_bps / d, k.p5_bps / d, k.median_bps / d, k.power_w / d};
}

std::shared_ptr<const Policy> untrained_policy(const ExperimentConfig& config, const TrainerConfig& trainer) {
  QEnsemble ens;
  for (const auto& spec : trainer.ensemble_specs) ens.members.push_back({spec, init_weights(spec)});
  ens.normalizer = Normalizer::identity(config.scenario.feature_dim());
  ens.action_count = config.scenario.action_count();
  return std::make_shared<Policy>(package_policy(std::move(ens), config.schedule, config.scenario.action_labels, 1));
}

std::vector<RoundSummary> run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  const ScenarioSpec& spec = config.scenario;
  const bool write = !dir.empty();
  std::string metrics = kMetricsHeader;
  std::string training = "round,member,q_iteration,epoch,mse\n";
  ReplayStore store(config.replay_capacity);
  auto policy = untrained_policy(config, config.resolved_trainer(seed));
  std::vector<RoundSummary> out;

  for (std::size_t r = 0; r < config.rounds; ++r) {
    try {
      ReplaySink sink;
      double reward_sum = 0.0;
      std::size_t reward_n = 0;
      for (std::size_t e = 0; e < config.episodes_per_round; ++e) {
        const std::uint64_t ws = collect_world_seed(seed, e);
        World world = make_world(spec, ws);
        auto agents = make_agents(spec, "r" + std::to_string(r) + ".e" + std::to_string(e), policy, derive_seed(ws, r + 1));
        for (auto& a : agents) a.set_exploration_offset(static_cast<double>(r) * config.episode_duration);
        const auto m = run_episode(spec, world, agents, config.episode_duration, &sink);
        append_metrics(metrics, "collect", r, e, m);
        for (const auto& rec : m.records) reward_sum += rec.reward;
        reward_n += m.records.size();
      }
      store = merge(store, sink.snapshot());
      if (store.empty()) throw Error(ErrorCode::empty_batch, "no transitions collected");

      const TrainerConfig trainer = config.resolved_trainer(derive_seed(seed, r));
      TrainResult trained = nfq_train(store, trainer);
      for (const auto& l : trained.losses)
        training += std::to_string(r) + ',' + std::to_string(l.member) + ',' + std::to_string(l.q_iteration) + ',' +
                    std::to_string(l.epoch) + ',' + num(l.mse) + '\n';
      policy = std::make_shared<Policy>(
          package_policy(std::move(trained.ensemble), config.schedule, spec.action_labels, r + 2));
      if (write) save_policy_file(*policy, (dir / ("policy_round" + std::to_string(r) + ".json")).string());

      const EvalKpi k = evaluate(config, spec, policy, seed, "r" + std::to_string(r) + ".eval", &metrics, r);
      RoundSummary s;
      s.seed = seed;
      s.round = r;
      s.policy_version = policy->version;
      s.transitions = store.size();
      s.collect_reward = reward_n ? reward_sum / static_cast<double>(reward_n) : std::nan("");
      s.eval_reward = k.reward;
      s.eval_harmonic_mean_bps = k.harmonic_mean_bps;
      s.eval_p5_bps = k.p5_bps;
      s.eval_median_bps = k.median_bps;
      s.eval_power_w = k.power_w;
      out.push_back(s);
    } catch (const Error& e) {
      throw Error(e.code(), "seed " + std::to_string(seed) + " round " + std::to_string(r) + ": " + e.what());
    }
  }
  if (write) {
    write_text(dir / "metrics.csv", metrics);
    write_text(dir / "training.csv", training);
    persist_file(store, (dir / "transitions.jsonl").string());
  }
  return out;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::vector<RoundSummary> ExperimentResult::of_seed(std::uint64_t seed) const {
  std::vector<RoundSummary> out;
  for (const auto& r : rounds)
    if (r.seed == seed) out.push_back(r);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path root = config.output_dir;
  if (!root.empty()) {
    prepare_dir(root);
    write_text(root / "config.json", serialize_config(config));
  }
  ExperimentResult result;
  for (auto seed : config.seeds) {
    fs::path dir;
    if (!root.empty()) {
      dir = root / ("seed_" + std::to_string(seed));
      prepare_dir(dir);
    }
    auto rows = run_seed(config, seed, dir);
    result.rounds.insert(result.rounds.end(), rows.begin(), rows.end());
  }
  if (!root.empty()) write_text(root / "summary.csv", summary_csv(result.rounds));
  return result;
}

std::vector<BaselineRow> run_baseline_sweep(const ExperimentConfig& config) {
  config.validate();
  std::vector<double> values = config.baseline_sweep;
  if (values.empty()) values.push_back(config.scenario.initial_value);
  std::vector<BaselineRow> rows;
  for (double v : values) {
    ScenarioSpec spec = config.scenario;
    spec.initial_value = v;
    const auto hold = make_hold_policy(spec);
    for (auto seed : config.seeds) {
      const EvalKpi k = evaluate(config, spec, hold, seed, "fixed", nullptr, 0);
      rows.push_back({v, seed, k.reward, k.harmonic_mean_bps, k.p5_bps, k.median_bps, k.power_w});
    }
  }
  if (!config.output_dir.empty()) {
    const fs::path root = config.output_dir;
    prepare_dir(root);
    write_text(root / "config.json", serialize_config(config));
    write_text(root / "baseline.csv", baseline_csv(rows));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report

const std::vector<std::string>& report_kpis() {
  static const std::vector<std::string> k{"reward", "harmonic_mean_bps", "p5_bps", "median_bps", "power_w"};
  return k;
}

namespace {

double learned_kpi(const RoundSummary& r, const std::string& kpi) {
  if (kpi == "reward") return r.eval_reward;
  if (kpi == "harmonic_mean_bps") return r.eval_harmonic_mean_bps;
  if (kpi == "p5_bps") return r.eval_p5_bps;
  if (kpi == "median_bps") return r.eval_median_bps;
  return r.eval_power_w;
}

double baseline_kpi(const BaselineRow& r, const std::string& kpi) {
  if (kpi == "reward") return r.reward;
  if (kpi == "harmonic_mean_bps") return r.harmonic_mean_bps;
  if (kpi == "p5_bps") return r.p5_bps;
  if (kpi == "median_bps") return r.median_bps;
  return r.power_w;
}

double gain(const std::string& kpi, double learned, double base) {
  if (base == 0.0) return learned == base ? 0.0 : std::nan("");
  const double g = (learned - base) / std::abs(base) * 100.0;
  return kpi == "power_w" ? -g : g;
}

}  // namespace

std::vector<ReportRow> compare_report(ScenarioId learned_scenario, const std::vector<RoundSummary>& learned,
                                      ScenarioId baseline_scenario, const std::vector<BaselineRow>& baseline) {
  if (learned_scenario != baseline_scenario)
    throw Error(ErrorCode::invalid_argument, "cannot compare " + to_string(learned_scenario) + " results with " +
                                                 to_string(baseline_scenario) + " baselines");
  if (learned.empty() || baseline.empty()) throw Error(ErrorCode::invalid_argument, "report needs learned and baseline rows");

  std::size_t last = 0;
  for (const auto& r : learned) last = std::max(last, r.round);
  std::vector<const RoundSummary*> finals;
  for (const auto& r : learned)
    if (r.round == last) finals.push_back(&r);

  std::vector<double> values;
  for (const auto& b : baseline)
    if (std::find(values.begin(), values.end(), b.value) == values.end()) values.push_back(b.value);

  std::vector<ReportRow> rows;
  for (const auto& kpi : report_kpis()) {
    double l = 0.0;
    for (auto* r : finals) l += learned_kpi(*r, kpi);
    l /= static_cast<double>(finals.size());

    std::vector<std::pair<double, double>> per_value;  // (value, mean kpi)
    for (double v : values) {
      double s = 0.0;
      std::size_t n = 0;
      for (const auto& b : baseline)
        if (b.value == v) {
          s += baseline_kpi(b, kpi);
          ++n;
        }
      per_value.emplace_back(v, s / static_cast<double>(n));
    }
    const bool lower_better = kpi == "power_w";
    auto best = per_value.front();
    for (const auto& p : per_value)
      if (lower_better ? p.second < best.second : p.second > best.second) best = p;
    rows.push_back({kpi, l, "best", best.second, gain(kpi, l, best.second)});
    for (const auto& [v, b] : per_value) rows.push_back({kpi, l, "fixed=" + num(v), b, gain(kpi, l, b)});
  }
  return rows;
}

std::vector<ReportRow> compare_report_dirs(const std::string& learned_dir, const std::string& baseline_dir) {
  const fs::path ld = learned_dir, bd = baseline_dir;
  const auto lc = parse_config(read_text(ld / "config.json"));
  const auto bc = parse_config(read_text(bd / "config.json"));
  const auto learned = parse_summary_csv(read_text(ld / "summary.csv"));
  const auto baseline = parse_baseline_csv(read_text(bd / "baseline.csv"));
  auto rows = compare_report(lc.scenario.id, learned, bc.scenario.id, baseline);
  write_text(ld / "report.csv", report_csv(rows));
  return rows;
}

// ---------------------------------------------------------------------------
// CSV forms

std::string summary_csv(const std::vector<RoundSummary>& rows) {
  std::string out =
      "seed,round,policy_version,transitions,collect_reward,eval_reward,eval_harmonic_mean_bps,eval_p5_bps,"
      "eval_median_bps,eval_power_w\n";
  for (const auto& r : rows)
    out += std::to_string(r.seed) + ',' + std::to_string(r.round) + ',' + std::to_string(r.policy_version) + ',' +
           std::to_string(r.transitions) + ',' + num(r.collect_reward) + ',' + num(r.eval_reward) + ',' +
           num(r.eval_harmonic_mean_bps) + ',' + num(r.eval_p5_bps) + ',' + num(r.eval_median_bps) + ',' +
           num(r.eval_power_w) + '\n';
  return out;
}

std::vector<RoundSummary> parse_summary_csv(const std::string& text) {
  CsvTable t(text, "summary.csv");
  std::vector<RoundSummary> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    RoundSummary r;
    r.seed = t.integer(i, "seed");
    r.round = t.integer(i, "round");
    r.policy_version = t.integer(i, "policy_version");
    r.transitions = t.integer(i, "transitions");
    r.collect_reward = t.number(i, "collect_reward");
    r.eval_reward = t.number(i, "eval_reward");
    r.eval_harmonic_mean_bps = t.number(i, "eval_harmonic_mean_bps");
    r.eval_p5_bps = t.number(i, "eval_p5_bps");
    r.eval_median_bps = t.number(i, "eval_median_bps");
    r.eval_power_w = t.number(i, "eval_power_w");
    out.push_back(r);
  }
  return out;
}

std::string baseline_csv(const std::vector<BaselineRow>& rows) {
  std::string out = "value,seed,reward,harmonic_mean_bps,p5_bps,median_bps,power_w\n";
  for (const auto& r : rows)
    out += num(r.value) + ',' + std::to_string(r.seed) + ',' + num(r.reward) + ',' + num(r.harmonic_mean_bps) + ',' +
           num(r.p5_bps) + ',' + num(r.median_bps) + ',' + num(r.power_w) + '\n';
  return out;
}

std::vector<BaselineRow> parse_baseline_csv(const std::string& text) {
  CsvTable t(text, "baseline.csv");
  std::vector<BaselineRow> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    out.push_back({t.number(i, "value"), t.integer(i, "seed"), t.number(i, "reward"),
                   t.number(i, "harmonic_mean_bps"), t.number(i, "p5_bps"), t.number(i, "median_bps"),
                   t.number(i, "power_w")});
  return out;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "kpi,learned,baseline,baseline_value,gain_pct\n";
  for (const auto& r : rows)
    out += r.kpi + ',' + num(r.learned) + ',' + r.baseline + ',' + num(r.baseline_value) + ',' + num(r.gain_pct) + '\n';
  return out;
}

}  // namespace rrm
