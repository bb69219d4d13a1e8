#pragma once

// Collect -> train -> deploy loop, fixed-parameter baselines and the
// learned-vs-baseline report.

#include <cstdint>
#include <string>
#include <vector>

#include "rrm/config.hpp"

namespace rrm {

/// One collect/train/evaluate cycle of one seed.
struct RoundSummary {
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::uint64_t policy_version = 0;  // policy deployed after this round
  std::size_t transitions = 0;       // replay size used for training
  double collect_reward = 0.0;       // mean reward while collecting
  double eval_reward = 0.0;          // mean reward of greedy episodes
  double eval_harmonic_mean_bps = 0.0;
  double eval_p5_bps = 0.0;
  double eval_median_bps = 0.0;
  double eval_power_w = 0.0;
};

struct ExperimentResult {
  std::vector<RoundSummary> rounds;  // seed-major, round-minor

  /// Rows of one seed in round order.
  std::vector<RoundSummary> of_seed(std::uint64_t seed) const;
};

/// Per seed: rounds of {collect episodes with the current policy, merge into
/// the replay store, nfq_train, package version round + 2, greedy
/// evaluation}. Round 0 collects with an untrained ensemble. With a
/// non-empty output_dir every artifact is written under it:
///   config.json, summary.csv, and per seed_<n>/: metrics.csv,
///   training.csv, transitions.jsonl, policy_round<r>.json.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct BaselineRow {
  double value = 0.0;  // fixed parameter
  std::uint64_t seed = 0;
  double reward = 0.0;
  double harmonic_mean_bps = 0.0;
  double p5_bps = 0.0;
  double median_bps = 0.0;
  double power_w = 0.0;
};

/// Hold-only episodes at each sweep value (the scenario's initial value when
/// the sweep is empty), on the same worlds the learned policy is evaluated
/// on. Writes config.json and baseline.csv when output_dir is set.
std::vector<BaselineRow> run_baseline_sweep(const ExperimentConfig& config);

struct ReportRow {
  std::string kpi;
  double learned = 0.0;
  std::string baseline;  // "best" or "fixed=<value>"
  double baseline_value = 0.0;
  double gain_pct = 0.0;  // positive is better; power gains are savings
};

/// KPI names compared by the report, in column order.
const std::vector<std::string>& report_kpis();

/// Learned final-round KPIs (mean over seeds) against each fixed value and
/// the best fixed value per KPI.
std::vector<ReportRow> compare_report(ScenarioId learned_scenario, const std::vector<RoundSummary>& learned,
                                      ScenarioId baseline_scenario, const std::vector<BaselineRow>& baseline);

/// Reads config.json and summary.csv / baseline.csv from two output
/// directories and writes report.csv into the learned one.
std::vector<ReportRow> compare_report_dirs(const std::string& learned_dir, const std::string& baseline_dir);

std::string summary_csv(const std::vector<RoundSummary>& rows);
std::vector<RoundSummary> parse_summary_csv(const std::string& text);
std::string baseline_csv(const std::vector<BaselineRow>& rows);
std::vector<BaselineRow> parse_baseline_csv(const std::string& text);
std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace rrm
