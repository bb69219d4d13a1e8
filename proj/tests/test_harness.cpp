#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rrm/config.hpp"
#include "rrm/harness.hpp"
#include "rrm/mdp.hpp"
#include "rrm/policy_io.hpp"
#include "rrm/replay.hpp"

using namespace rrm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("rrm_harness_" + name);
  fs::remove_all(d);
  return d;
}

ExperimentConfig tiny_config(const std::string& scenario = "power_control") {
  json j = {
      {"scenario", {{"id", scenario}, {"deployment", {{"users", 8}}}}},
      {"trainer",
       {{"q_iterations", 2},
        {"fit", {{"epochs", 5}, {"optimizer", "rprop"}}},
        {"ensemble", {{{"hidden_layers", {4}}}, {{"hidden_layers", {3, 3}}, {"activation", "relu"}}}}}},
      {"schedule", {{"epsilon_start", 0.9}, {"epsilon_end", 0.1}, {"decay_duration", 2.0}}},
      {"rounds", 1},
      {"episodes_per_round", 2},
      {"episode_duration", 0.5},
      {"eval_episodes", 1},
      {"seeds", {3}},
      {"baseline_sweep", {20.0, 40.0}},
  };
  if (scenario == "cio_balance") j["baseline_sweep"] = {0.0, 3.0, 6.0, 9.0};
  if (scenario == "trp_threshold") j["baseline_sweep"] = {3.0};
  return parse_config(j.dump());
}

}  // namespace

TEST_CASE("value_iteration") {
  SUBCASE("single state geometric series") {
    TabularMdp m;
    m.states = m.actions = 1;
    m.transition = {{{1.0}}};
    m.reward = {{1.0}};
    m.gamma = 0.9;
    const auto q = value_iteration(m);
    CHECK(std::abs(q[0][0] - 10.0) <= 1e-9);
    CHECK(bellman_residual(m, q) <= 1e-10);
  }
  SUBCASE("2-state chain") {
    const auto m = TabularMdp::chain(2, 0.9);
    const auto q = value_iteration(m);
    // hand fixed point: V(1) = 1 / (1 - 0.9) = 10
    CHECK(q[1][0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(q[1][1] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(q[0][1] == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(q[0][0] == doctest::Approx(8.1).epsilon(1e-9));
    CHECK(greedy_policy(q) == std::vector<std::size_t>{1, 0});
    const auto opt = optimal_actions(q, 1e-6);
    CHECK(opt[0] == std::vector<std::size_t>{1});
    CHECK(opt[1] == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("myopic") {
    auto m = TabularMdp::chain(3, 0.0);
    m.reward[0] = {0.25, -1.0};
    CHECK(value_iteration(m) == m.reward);
  }
  SUBCASE("residual within tolerance on random MDPs") {
    SplitMix rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      TabularMdp m;
      m.states = 1 + rng.index(6);
      m.actions = 1 + rng.index(4);
      m.gamma = rng.uniform(0.0, 0.97);
      m.transition.assign(m.states, std::vector<std::vector<double>>(m.actions, std::vector<double>(m.states)));
      m.reward.assign(m.states, std::vector<double>(m.actions));
      for (auto& row : m.transition)
        for (auto& p : row) {
          double total = 0.0;
          for (auto& x : p) total += (x = rng.unit());
          for (auto& x : p) x /= total;
        }
      for (auto& r : m.reward)
        for (auto& x : r) x = rng.uniform(-2, 2);
      for (double tol : {1e-4, 1e-8}) CHECK(bellman_residual(m, value_iteration(m, tol)) <= tol);
    }
  }
  SUBCASE("validation") {
    auto m = TabularMdp::chain(2, 0.9);
    m.gamma = 1.0;
    CHECK_THROWS_AS(m.validate(), Error);
    m = TabularMdp::chain(2, 0.9);
    m.transition[0][0] = {0.5, 0.6};
    CHECK_THROWS_AS(m.validate(), Error);
  }
  SUBCASE("sampled transitions follow the dynamics") {
    const auto m = TabularMdp::chain(4, 0.9);
    const auto ts = sample_transitions(m, 10, 20, 7);
    CHECK(ts.size() == 200);
    for (const auto& t : ts) {
      const auto s = static_cast<std::size_t>(std::max_element(t.state.begin(), t.state.end()) - t.state.begin());
      const auto n = static_cast<std::size_t>(std::max_element(t.next_state.begin(), t.next_state.end()) -
                                              t.next_state.begin());
      CHECK(n == (t.action == 1 ? std::min(s + 1, std::size_t{3}) : s));
      CHECK(t.reward == m.reward[s][t.action]);
      CHECK_FALSE(t.terminal);
    }
  }
}

TEST_CASE("MDP documents") {
  const auto m = parse_mdp(R"({"states": 2, "actions": 2, "gamma": 0.9,
      "reward": [[0, 0], [1, 1]], "next": [[0, 1], [1, 1]]})");
  const auto chain = TabularMdp::chain(2, 0.9);
  CHECK(m.transition == chain.transition);
  CHECK(m.reward == chain.reward);
  const auto s = parse_mdp(R"({"states": 1, "actions": 1, "gamma": 0.5, "reward": [[2]], "transition": [[[1.0]]]})");
  CHECK(value_iteration(s)[0][0] == doctest::Approx(4.0));
  try {
    parse_mdp(R"({"states": 1, "actions": 1, "gamma": 0.5, "reward": [[2]], "next": [[0]], "extra": 1})");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("extra") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_mdp(R"({"states": 1, "actions": 1, "gamma": 0.5, "reward": [[2]]})"), Error);
  CHECK_THROWS_AS(parse_mdp(R"({"states": 2, "actions": 1, "gamma": 0.5, "reward": [[2], [1]], "next": [[0], [5]]})"),
                  Error);
}

TEST_CASE("config documents") {
  SUBCASE("defaults and overrides") {
    const auto c = parse_config(R"({"scenario": {"id": "cio_balance", "initial_value": 3}})");
    CHECK(c.scenario.id == ScenarioId::cio_balance);
    CHECK(c.scenario.reward == RewardKind::cell_edge_rate);
    CHECK(c.scenario.initial_value == 3.0);
    CHECK(c.rounds == 5);
    CHECK(c.episodes_per_round == 10);
    CHECK(c.episode_duration == 60.0);
    CHECK(c.schedule.epsilon_start == 0.9);
    CHECK(c.schedule.epsilon_end == 0.1);
    CHECK(c.schedule.decay_duration == 40.0);
    const auto t = c.resolved_trainer(1);
    CHECK(t.ensemble_specs.size() == 5);
    for (const auto& m : t.ensemble_specs) {
      CHECK(m.input_dim == 3);
      CHECK(m.output_dim == 3);
    }
    CHECK(c.resolved_trainer(1).ensemble_specs[0].seed != c.resolved_trainer(2).ensemble_specs[0].seed);
  }
  SUBCASE("serialize round-trip") {
    auto c = tiny_config();
    c.scenario.traffic.full_buffer = false;
    c.scenario.traffic.classes = {{0.5, 1e5, 2.0}, {0.5, 1e6, 1.0}};
    c.scenario.traffic.load.period_s = 5.0;
    c.scenario.traffic.load.multipliers = {1.0, 3.0};
    c.replay_capacity = 500;
    c.trainer.target_clip = TargetClip{-5.0, 5.0};
    const auto text = serialize_config(c);
    const auto d = parse_config(text);
    CHECK(serialize_config(d) == text);
    CHECK(d.replay_capacity == std::optional<std::size_t>(500));
    CHECK(d.scenario.traffic.classes.size() == 2);
    CHECK(d.trainer.ensemble_specs.size() == 2);
    CHECK(d.trainer.ensemble_specs[1].activation == Activation::relu);
  }
  SUBCASE("unknown keys name their path") {
    auto expect = [](const std::string& text, const std::string& needle) {
      try {
        parse_config(text);
        FAIL("expected a parse error for " << text);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse);
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
      }
    };
    expect(R"({"scenario": {"id": "power_control"}, "round": 3})", "'round'");
    expect(R"({"scenario": {"id": "power_control", "radio": {"tti": 1}}})", "scenario.radio.tti");
    expect(R"({"scenario": {"id": "power_control"}, "trainer": {"fit": {"lr": 1}}})", "trainer.fit.lr");
    expect(R"({"scenario": {"id": "power_control"}, "trainer": {"ensemble": [{"hidden": [3]}]}})", "hidden");
    expect(R"({"scenario": {"id": "nope"}})", "scenario.id");
    expect(R"({"rounds": 2})", "scenario");
    expect(R"({"scenario": {"id": "power_control"}, "rounds": 0})", "rounds");
    expect(R"({"scenario": {"id": "power_control"}, "seeds": []})", "seeds");
    expect(R"({"scenario": {"id": "power_control"}, "rounds": "five"})", "rounds");
    expect("{", "config");
  }
}

TEST_CASE("compare_report arithmetic") {
  std::vector<RoundSummary> learned{{1, 0, 2, 10, 0.5, 1.0, 0.9e6, 0.1e6, 1.0e6, 10.0},
                                    {1, 1, 3, 20, 0.7, 1.2, 1.2e6, 0.2e6, 2.0e6, 8.0},
                                    {2, 0, 2, 10, 0.5, 1.0, 0.9e6, 0.1e6, 1.0e6, 10.0},
                                    {2, 1, 3, 20, 0.7, 1.2, 1.2e6, 0.2e6, 2.0e6, 8.0}};
  std::vector<BaselineRow> base{{30.0, 1, 1.0, 1.0e6, 0.2e6, 2.0e6, 5.0}, {40.0, 1, 0.8, 0.8e6, 0.1e6, 1.0e6, 10.0},
                                {30.0, 2, 1.0, 1.0e6, 0.2e6, 2.0e6, 5.0}, {40.0, 2, 0.8, 0.8e6, 0.1e6, 1.0e6, 10.0}};
  const auto rows = compare_report(ScenarioId::power_control, learned, ScenarioId::power_control, base);
  CHECK(rows.size() == report_kpis().size() * 3);
  auto find = [&](const std::string& kpi, const std::string& which) {
    for (const auto& r : rows)
      if (r.kpi == kpi && r.baseline == which) return r;
    FAIL("missing row " << kpi << " " << which);
    return ReportRow{};
  };
  // final round only: learned harmonic mean 1.2e6 against best 1.0e6
  CHECK(find("harmonic_mean_bps", "best").learned == 1.2e6);
  CHECK(find("harmonic_mean_bps", "best").gain_pct == doctest::Approx(20.0));
  CHECK(find("harmonic_mean_bps", "fixed=40").gain_pct == doctest::Approx(50.0));
  CHECK(find("p5_bps", "best").gain_pct == doctest::Approx(0.0));
  CHECK(find("p5_bps", "fixed=40").gain_pct == doctest::Approx(100.0));
  // power: best is the lowest draw, savings positive
  CHECK(find("power_w", "best").baseline_value == 5.0);
  CHECK(find("power_w", "best").gain_pct == doctest::Approx(-60.0));
  CHECK(find("power_w", "fixed=40").gain_pct == doctest::Approx(20.0));
  CHECK(find("reward", "best").gain_pct == doctest::Approx(20.0));

  SUBCASE("identical numbers give zero gains") {
    std::vector<RoundSummary> same{{1, 0, 2, 10, 0.0, 1.0, 1.0e6, 0.2e6, 2.0e6, 5.0}};
    for (const auto& r : compare_report(ScenarioId::power_control, same, ScenarioId::power_control,
                                        {{30.0, 1, 1.0, 1.0e6, 0.2e6, 2.0e6, 5.0}}))
      CHECK(r.gain_pct == 0.0);
  }
  SUBCASE("mismatched scenarios") {
    CHECK_THROWS_AS(compare_report(ScenarioId::power_control, learned, ScenarioId::cio_balance, base), Error);
  }
  SUBCASE("csv columns") {
    const auto csv = report_csv(rows);
    CHECK(csv.rfind("kpi,learned,baseline,baseline_value,gain_pct\n", 0) == 0);
  }
}

TEST_CASE("experiment artifacts") {
  for (const std::string scenario : {"power_control", "cio_balance", "trp_threshold"}) {
    CAPTURE(scenario);
    auto c = tiny_config(scenario);
    const auto dir = fresh_dir("smoke_" + scenario);
    c.output_dir = dir.string();
    const auto result = run_experiment(c);
    REQUIRE(result.rounds.size() == 1);
    CHECK(result.rounds[0].policy_version == 2);
    CHECK(result.rounds[0].transitions > 0);

    const auto seed_dir = dir / "seed_3";
    const auto policy = load_policy_file((seed_dir / "policy_round0.json").string());
    CHECK(policy.version == 2);
    CHECK(policy.ensemble.members.size() == 2);
    const auto store = load_file((seed_dir / "transitions.jsonl").string());
    CHECK(store.size() == result.rounds[0].transitions);
    const auto metrics = slurp(seed_dir / "metrics.csv");
    CHECK(metrics.rfind("phase,round,episode,sim_time,agent_id,action,reward,param,", 0) == 0);
    CHECK(metrics.find("\ncollect,0,") != std::string::npos);
    CHECK(metrics.find("\neval,0,") != std::string::npos);
    CHECK(slurp(seed_dir / "training.csv").rfind("round,member,q_iteration,epoch,mse\n", 0) == 0);
    CHECK(parse_summary_csv(slurp(dir / "summary.csv")).size() == 1);
    CHECK(serialize_config(parse_config(slurp(dir / "config.json"))) == serialize_config(c));

    // baseline on the same scenario and report between the two
    const auto bdir = fresh_dir("base_" + scenario);
    c.output_dir = bdir.string();
    const auto rows = run_baseline_sweep(c);
    CHECK(rows.size() == c.baseline_sweep.size());
    const auto report = compare_report_dirs(dir.string(), bdir.string());
    CHECK(report.size() == report_kpis().size() * (c.baseline_sweep.size() + 1));
    CHECK(fs::exists(dir / "report.csv"));
  }
}

TEST_CASE("experiment determinism") {
  auto c = tiny_config();
  c.rounds = 2;
  c.seeds = {3, 4};
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  c.output_dir = a.string();
  run_experiment(c);
  c.output_dir = b.string();
  run_experiment(c);
  for (const auto* f : {"summary.csv", "seed_3/metrics.csv", "seed_4/metrics.csv", "seed_3/transitions.jsonl",
                        "seed_4/policy_round1.json", "seed_3/training.csv"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  CHECK(slurp(a / "seed_3/metrics.csv") != slurp(a / "seed_4/metrics.csv"));
  const auto rows = parse_summary_csv(slurp(a / "summary.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].policy_version == 3);
  CHECK(rows[1].transitions > rows[0].transitions);

  // no output dir: same numbers, nothing written
  c.output_dir = "";
  const auto r = run_experiment(c);
  CHECK(summary_csv(r.rounds) == slurp(a / "summary.csv"));
}

TEST_CASE("baseline sweep") {
  auto c = tiny_config("cio_balance");
  c.seeds = {3, 4};
  c.output_dir = "";
  const auto rows = run_baseline_sweep(c);
  CHECK(rows.size() == 8);
  CHECK(baseline_csv(rows) == baseline_csv(run_baseline_sweep(c)));
  for (const auto& r : rows) CHECK(std::isfinite(r.reward));

  // a single sweep value matches the initial-value run
  auto one = c;
  one.baseline_sweep = {3.0};
  auto plain = c;
  plain.baseline_sweep.clear();
  plain.scenario.initial_value = 3.0;
  const auto x = run_baseline_sweep(one), y = run_baseline_sweep(plain);
  REQUIRE(x.size() == 2);
  REQUIRE(y.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(x[i].value == y[i].value);
    CHECK(x[i].reward == y[i].reward);
    CHECK(x[i].p5_bps == y[i].p5_bps);
  }
  // learned and baseline summaries round-trip through CSV exactly
  CHECK(baseline_csv(parse_baseline_csv(baseline_csv(rows))) == baseline_csv(rows));
}

TEST_CASE("errors carry seed and round context") {
  auto c = tiny_config();
  c.output_dir = "";
  c.trainer.fit.learning_rate = 1e300;
  c.trainer.fit.optimizer = Optimizer::gradient_descent;
  try {
    run_experiment(c);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::divergence);
    CHECK(std::string(e.what()).rfind("seed 3 round 0:", 0) == 0);
  }
  auto d = tiny_config();
  d.output_dir = "/proc/definitely/not/writable";
  CHECK_THROWS_AS(run_experiment(d), Error);
}
