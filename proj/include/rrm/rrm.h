/* C interface to the rrm library.
 *
 * Every function returns an rrm_status. On failure, rrm_last_error()
 * returns a message for the calling thread that stays valid until the next
 * call on that thread. Strings handed out through char** are owned by the
 * caller and released with rrm_string_free.
 */
#ifndef RRM_RRM_H
#define RRM_RRM_H

#include <stddef.h>
#include <stdint.h>

#if defined(RRM_BUILDING_LIBRARY)
#define RRM_API __attribute__((visibility("default")))
#else
#define RRM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rrm_status {
  RRM_OK = 0,
  RRM_ERR_INVALID_ARGUMENT = 1,
  RRM_ERR_SHAPE = 2,
  RRM_ERR_EMPTY_BATCH = 3,
  RRM_ERR_DIVERGENCE = 4,
  RRM_ERR_PARSE = 5,
  RRM_ERR_PROTOCOL = 6,
  RRM_ERR_STALE_POLICY = 7,
  RRM_ERR_NOT_READY = 8,
  RRM_ERR_IO = 9,
  RRM_ERR_INTERNAL = 100
} rrm_status;

typedef struct rrm_policy rrm_policy;
typedef struct rrm_agent rrm_agent;

RRM_API const char* rrm_last_error(void);
RRM_API const char* rrm_version(void);
RRM_API void rrm_string_free(char* s);

/* Policies (immutable once created). */
RRM_API rrm_status rrm_policy_parse(const char* json, rrm_policy** out);
RRM_API rrm_status rrm_policy_load(const char* path, rrm_policy** out);
RRM_API rrm_status rrm_policy_serialize(const rrm_policy* policy, char** out_json);
RRM_API void rrm_policy_free(rrm_policy* policy);
RRM_API rrm_status rrm_policy_info(const rrm_policy* policy, size_t* input_dim, size_t* action_count,
                                   uint64_t* version);
RRM_API rrm_status rrm_policy_greedy(const rrm_policy* policy, const double* state, size_t dim, size_t* action);

/* Agents. An agent keeps its own reference to the policy it is given. */
RRM_API rrm_status rrm_agent_create(const char* agent_id, const rrm_policy* policy, uint64_t seed, rrm_agent** out);
RRM_API void rrm_agent_free(rrm_agent* agent);
RRM_API rrm_status rrm_agent_set_epsilon(rrm_agent* agent, double epsilon);
RRM_API rrm_status rrm_agent_epsilon(const rrm_agent* agent, double sim_time, double* epsilon);
RRM_API rrm_status rrm_agent_select(rrm_agent* agent, const double* state, size_t dim, double sim_time,
                                    size_t* action);
/* Closes the pending decision; the transition comes back as one JSON line. */
RRM_API rrm_status rrm_agent_observe(rrm_agent* agent, double reward, const double* next_state, size_t dim,
                                     int terminal, double sim_time, char** out_transition_json);
RRM_API rrm_status rrm_agent_update_policy(rrm_agent* agent, const rrm_policy* policy);

/* Experiments. Artifacts go to the config's output_dir; when out_dir is
 * non-NULL it overrides it. rounds = 0 and seed = 0 keep the config values. */
RRM_API rrm_status rrm_run_experiment(const char* config_path, const char* out_dir, uint64_t seed, size_t rounds,
                                      char** out_summary_csv);
RRM_API rrm_status rrm_run_baseline(const char* config_path, const char* out_dir, uint64_t seed,
                                    char** out_baseline_csv);
RRM_API rrm_status rrm_compare_report(const char* learned_dir, const char* baseline_dir, char** out_report_csv);

/* Value iteration on an MDP document; returns {"q": [[...]], "policy": [...], "residual": x}. */
RRM_API rrm_status rrm_oracle(const char* mdp_path, double tolerance, char** out_json);

/* Validates a transitions file and echoes it in canonical form. */
RRM_API rrm_status rrm_replay_dump(const char* path, char** out_jsonl, size_t* count);

#ifdef __cplusplus
}
#endif

#endif
