// Command-line front end; talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "rrm/rrm.h"

namespace {

int report(rrm_status s) {
  if (s != RRM_OK) std::fprintf(stderr, "error: %s\n", rrm_last_error());
  return static_cast<int>(s);
}

int emit(rrm_status s, char*& text) {
  if (s == RRM_OK && text) std::fputs(text, stdout);
  rrm_string_free(text);
  text = nullptr;
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble NFQ radio resource management experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rrm_version());

  std::string config, out, learned_dir, baseline_dir, mdp_path, replay_path;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  double tolerance = 1e-10;

  auto* train = app.add_subcommand("train", "collect/train rounds; prints the per-round summary CSV");
  train->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "run this single seed instead of the config's seeds");
  train->add_option("--out", out, "output directory (overrides the config)");
  train->add_option("--rounds", rounds, "number of rounds (overrides the config)");

  auto* baseline = app.add_subcommand("baseline", "fixed-parameter sweep; prints the baseline CSV");
  baseline->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  baseline->add_option("--seed", seed, "run this single seed instead of the config's seeds");
  baseline->add_option("--out", out, "output directory (overrides the config)");

  auto* cmp = app.add_subcommand("report", "learned vs baseline gains; writes report.csv into the learned dir");
  cmp->add_option("learned-dir", learned_dir)->required()->check(CLI::ExistingDirectory);
  cmp->add_option("baseline-dir", baseline_dir)->required()->check(CLI::ExistingDirectory);

  auto* oracle = app.add_subcommand("oracle", "value iteration on an MDP document");
  oracle->add_option("mdp-file", mdp_path)->required()->check(CLI::ExistingFile);
  oracle->add_option("--tolerance", tolerance, "Bellman residual bound")->capture_default_str();

  auto* dump = app.add_subcommand("replay-dump", "validate a transitions file and print it");
  dump->add_option("file", replay_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  const char* out_dir = out.empty() ? nullptr : out.c_str();
  char* text = nullptr;
  // The status is computed before emit reads `text`.
  rrm_status s = RRM_OK;
  if (*train) {
    s = rrm_run_experiment(config.c_str(), out_dir, seed, rounds, &text);
    return emit(s, text);
  }
  if (*baseline) {
    s = rrm_run_baseline(config.c_str(), out_dir, seed, &text);
    return emit(s, text);
  }
  if (*cmp) {
    s = rrm_compare_report(learned_dir.c_str(), baseline_dir.c_str(), &text);
    return emit(s, text);
  }
  if (*oracle) {
    s = rrm_oracle(mdp_path.c_str(), tolerance, &text);
    if (s == RRM_OK) std::printf("%s\n", text);
    rrm_string_free(text);
    return report(s);
  }
  std::size_t count = 0;
  s = rrm_replay_dump(replay_path.c_str(), &text, &count);
  if (s == RRM_OK) std::fprintf(stderr, "%zu transitions\n", count);
  return emit(s, text);
}
