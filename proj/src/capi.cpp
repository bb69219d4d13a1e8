#include "rrm/rrm.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <span>
#include <string>

#include <json.hpp>

#include "rrm/agent.hpp"
#include "rrm/config.hpp"
#include "rrm/harness.hpp"
#include "rrm/mdp.hpp"
#include "rrm/policy_io.hpp"
#include "rrm/replay.hpp"

struct rrm_policy {
  std::shared_ptr<const rrm::Policy> policy;
};

struct rrm_agent {
  rrm::Agent agent;
};

namespace {

thread_local std::string g_last_error;

rrm_status fail(rrm_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <class F>
rrm_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return RRM_OK;
  } catch (const rrm::Error& e) {
    return fail(static_cast<rrm_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(RRM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RRM_ERR_INTERNAL, e.what());
  }
}

void need(const void* p, const char* name) {
  if (!p) throw rrm::Error(rrm::ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

rrm::ExperimentConfig load_with_overrides(const char* config_path, const char* out_dir, uint64_t seed,
                                          size_t rounds) {
  need(config_path, "config_path");
  auto config = rrm::load_config_file(config_path);
  if (out_dir) config.output_dir = out_dir;
  if (seed) config.seeds = {seed};
  if (rounds) config.rounds = rounds;
  config.validate();
  return config;
}

}  // namespace

extern "C" {

const char* rrm_last_error(void) { return g_last_error.c_str(); }

const char* rrm_version(void) { return "0.1.0"; }

void rrm_string_free(char* s) { std::free(s); }

rrm_status rrm_policy_parse(const char* json, rrm_policy** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new rrm_policy{std::make_shared<const rrm::Policy>(rrm::parse_policy(json))};
  });
}

rrm_status rrm_policy_load(const char* path, rrm_policy** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new rrm_policy{std::make_shared<const rrm::Policy>(rrm::load_policy_file(path))};
  });
}

rrm_status rrm_policy_serialize(const rrm_policy* policy, char** out_json) {
  return guard([&] {
    need(policy, "policy");
    need(out_json, "out_json");
    *out_json = copy_out(rrm::serialize_policy(*policy->policy));
  });
}

void rrm_policy_free(rrm_policy* policy) { delete policy; }

rrm_status rrm_policy_info(const rrm_policy* policy, size_t* input_dim, size_t* action_count, uint64_t* version) {
  return guard([&] {
    need(policy, "policy");
    if (input_dim) *input_dim = policy->policy->ensemble.input_dim();
    if (action_count) *action_count = policy->policy->action_count();
    if (version) *version = policy->policy->version;
  });
}

rrm_status rrm_policy_greedy(const rrm_policy* policy, const double* state, size_t dim, size_t* action) {
  return guard([&] {
    need(policy, "policy");
    need(state, "state");
    need(action, "action");
    if (dim != policy->policy->ensemble.input_dim())
      throw rrm::Error(rrm::ErrorCode::shape, "state has " + std::to_string(dim) + " features, policy expects " +
                                                  std::to_string(policy->policy->ensemble.input_dim()));
    *action = rrm::greedy_action(*policy->policy, std::span(state, dim));
  });
}

rrm_status rrm_agent_create(const char* agent_id, const rrm_policy* policy, uint64_t seed, rrm_agent** out) {
  return guard([&] {
    need(agent_id, "agent_id");
    need(policy, "policy");
    need(out, "out");
    *out = new rrm_agent{rrm::Agent(agent_id, policy->policy, seed)};
  });
}

void rrm_agent_free(rrm_agent* agent) { delete agent; }

rrm_status rrm_agent_set_epsilon(rrm_agent* agent, double epsilon) {
  return guard([&] {
    need(agent, "agent");
    if (std::isnan(epsilon)) {
      agent->agent.set_epsilon_override(std::nullopt);
      return;
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw rrm::Error(rrm::ErrorCode::invalid_argument, "epsilon must be in [0, 1]");
    agent->agent.set_epsilon_override(epsilon);
  });
}

rrm_status rrm_agent_epsilon(const rrm_agent* agent, double sim_time, double* epsilon) {
  return guard([&] {
    need(agent, "agent");
    need(epsilon, "epsilon");
    *epsilon = agent->agent.epsilon(sim_time);
  });
}

rrm_status rrm_agent_select(rrm_agent* agent, const double* state, size_t dim, double sim_time, size_t* action) {
  return guard([&] {
    need(agent, "agent");
    need(state, "state");
    need(action, "action");
    *action = agent->agent.select_action(std::span(state, dim), sim_time);
  });
}

rrm_status rrm_agent_observe(rrm_agent* agent, double reward, const double* next_state, size_t dim, int terminal,
                             double sim_time, char** out_transition_json) {
  return guard([&] {
    need(agent, "agent");
    need(next_state, "next_state");
    const auto t = agent->agent.observe(reward, std::span(next_state, dim), terminal != 0, sim_time);
    if (out_transition_json) *out_transition_json = copy_out(rrm::transition_to_json_line(t));
  });
}

rrm_status rrm_agent_update_policy(rrm_agent* agent, const rrm_policy* policy) {
  return guard([&] {
    need(agent, "agent");
    need(policy, "policy");
    agent->agent.update_policy(policy->policy);
  });
}

rrm_status rrm_run_experiment(const char* config_path, const char* out_dir, uint64_t seed, size_t rounds,
                              char** out_summary_csv) {
  return guard([&] {
    const auto config = load_with_overrides(config_path, out_dir, seed, rounds);
    const auto result = rrm::run_experiment(config);
    if (out_summary_csv) *out_summary_csv = copy_out(rrm::summary_csv(result.rounds));
  });
}

rrm_status rrm_run_baseline(const char* config_path, const char* out_dir, uint64_t seed, char** out_baseline_csv) {
  return guard([&] {
    const auto config = load_with_overrides(config_path, out_dir, seed, 0);
    const auto rows = rrm::run_baseline_sweep(config);
    if (out_baseline_csv) *out_baseline_csv = copy_out(rrm::baseline_csv(rows));
  });
}

rrm_status rrm_compare_report(const char* learned_dir, const char* baseline_dir, char** out_report_csv) {
  return guard([&] {
    need(learned_dir, "learned_dir");
    need(baseline_dir, "baseline_dir");
    const auto rows = rrm::compare_report_dirs(learned_dir, baseline_dir);
    if (out_report_csv) *out_report_csv = copy_out(rrm::report_csv(rows));
  });
}

rrm_status rrm_oracle(const char* mdp_path, double tolerance, char** out_json) {
  return guard([&] {
    need(mdp_path, "mdp_path");
    need(out_json, "out_json");
    const auto mdp = rrm::load_mdp_file(mdp_path);
    const auto q = rrm::value_iteration(mdp, tolerance);
    nlohmann::json j;
    j["q"] = q;
    j["policy"] = rrm::greedy_policy(q);
    j["residual"] = rrm::bellman_residual(mdp, q);
    *out_json = copy_out(j.dump());
  });
}

rrm_status rrm_replay_dump(const char* path, char** out_jsonl, size_t* count) {
  return guard([&] {
    need(path, "path");
    const auto store = rrm::load_file(path);
    if (count) *count = store.size();
    if (out_jsonl) *out_jsonl = copy_out(rrm::persist(store));
  });
}

}  // extern "C"
