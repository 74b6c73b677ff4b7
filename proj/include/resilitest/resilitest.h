// Copyright 2026 The Resilitest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface of the resilitest toolkit. Every function returns an
 * rt_status; on failure rt_last_error() describes the cause (per thread). */
#ifndef RESILITEST_RESILITEST_H_
#define RESILITEST_RESILITEST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RT_API __declspec(dllexport)
#else
#define RT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rt_status {
  RT_OK = 0,
  RT_ERR_INVALID_ARGUMENT = 1,
  RT_ERR_PARSE = 2,
  RT_ERR_VERSION = 3,
  RT_ERR_VALIDATION = 4,
  RT_ERR_IO = 5,
  RT_ERR_INSUFFICIENT_EVIDENCE = 6,
  RT_ERR_NOT_FOUND = 7,
  RT_ERR_INTERNAL = 8
} rt_status;

enum { RT_VERDICT_COUNT = 5 };
/* Index order of rt_campaign_summary.verdicts. */
typedef enum rt_verdict {
  RT_PASS = 0,
  RT_FAIL_NO_RECOVERY = 1,
  RT_FAIL_SILENT = 2,
  RT_FAIL_NO_IMPACT = 3,
  RT_STARTUP_FAILURE = 4
} rt_verdict;

RT_API const char* rt_version(void);
RT_API const char* rt_status_name(rt_status status);
RT_API const char* rt_verdict_name(rt_verdict verdict);
/* Message of the last failed call on this thread; "" after success. */
RT_API const char* rt_last_error(void);
/* Frees strings returned through char** out-parameters. */
RT_API void rt_string_free(char* text);

/* ---- pipeline commands ------------------------------------------------ */

RT_API rt_status rt_simulate_record(const char* topology_path, const char* workload_path,
                                    uint64_t seed, const char* corpus_out, size_t* traces_out);

/* registry_path and weights ("w_len,w_div,w_dur") may be NULL. Writes
 * clusters.txt, templates.jsonl, baseline.txt and selection.txt to out_dir. */
RT_API rt_status rt_analyze(const char* corpus_path, const char* registry_path,
                            const char* weights, const char* out_dir, size_t* interfaces_out);

typedef struct rt_plan_options {
  size_t top_k;            /* 0 = every interface */
  size_t n_services;       /* default 3 */
  uint64_t seed;
  const char* catalog;     /* NULL = built-in library */
  const char* topology;    /* NULL = no async ground truth */
  const char* history;     /* NULL = no history-aware selection */
} rt_plan_options;

RT_API void rt_plan_options_init(rt_plan_options* options);

/* Writes plan.txt, runplan.txt and meta.txt to out_dir. */
RT_API rt_status rt_plan(const char* corpus_path, const char* analysis_dir,
                         const rt_plan_options* options, const char* out_dir, size_t* cases_out);

typedef struct rt_run_options {
  uint64_t seed;
  const char* catalog;      /* NULL = built-in library */
  const char* criteria;     /* override file, may be NULL */
  const char* history;      /* may be NULL */
  const char* phases;       /* "startup_s,inject_s,recover_s[@rps]", NULL = 60,60,60@10 */
  int reset_history;
  int entry_only_oracle;
  int bug_free;             /* run against the topology with every bug fixed */
  size_t parallel;
} rt_run_options;

RT_API void rt_run_options_init(rt_run_options* options);

typedef struct rt_campaign_summary {
  size_t top_k;
  size_t cases;
  size_t skipped;
  size_t startups;
  size_t reschedules;
  size_t verdicts[RT_VERDICT_COUNT];
  size_t covered_pairs;
  size_t detected_bugs;
  size_t seeded_bugs;
} rt_campaign_summary;

RT_API rt_status rt_run(const char* plan_dir, const char* analysis_dir, const char* topology_path,
                        const rt_run_options* options, const char* report_out,
                        rt_campaign_summary* summary_out);

/* Summary of one report, or a sensitivity table over several. */
RT_API rt_status rt_report(const char* const* report_paths, size_t count,
                           const char* topology_path, char** text_out);

/* Replays every template once against a healthy system. listing_out may be NULL. */
RT_API rt_status rt_replay_check(const char* topology_path, const char* analysis_dir,
                                 uint64_t seed, const char* listing_out, size_t* total_out,
                                 size_t* succeeded_out);

/* Writes the criteria derived from analysis_dir/baseline.txt, with the
 * optional override file applied on top. */
RT_API rt_status rt_derive_criteria(const char* analysis_dir, const char* overrides_path,
                                    const char* out_path);

/* Adds (add != 0) or removes a manual variable in the registry file,
 * creating it when missing. side: "req"|"resp"; kind: fresh_id|timestamp|opaque_copy. */
RT_API rt_status rt_registry_edit(const char* registry_path, int add, const char* interface_id,
                                  const char* side, const char* key_path, const char* kind,
                                  const char* note);

/* ---- simulator handle ------------------------------------------------- */

typedef struct rt_system rt_system;

RT_API rt_status rt_system_start(const char* topology_path, uint64_t seed, int bug_free,
                                 rt_system** system_out);
RT_API void rt_system_free(rt_system* system);
RT_API rt_status rt_system_now(const rt_system* system, uint64_t* virtual_us_out);
/* Runs events up to the absolute virtual time; an earlier time is a no-op. */
RT_API rt_status rt_system_advance(rt_system* system, uint64_t virtual_us);
/* payload_json: flat or nested JSON object; may be NULL. */
RT_API rt_status rt_system_submit(rt_system* system, const char* method, const char* uri,
                                  const char* payload_json, size_t* ticket_out);
/* RT_ERR_NOT_FOUND while the request is still in flight. */
RT_API rt_status rt_system_response(const rt_system* system, size_t ticket, int* status_out,
                                    char** body_json_out);
/* endpoint: "Component/framework/method". catalog_path NULL = built-in. */
RT_API rt_status rt_system_arm(rt_system* system, const char* service, const char* endpoint,
                               const char* catalog_path, const char* fault_id);
RT_API rt_status rt_system_disarm(rt_system* system, const char* service, const char* endpoint);

#ifdef __cplusplus
}
#endif

#endif /* RESILITEST_RESILITEST_H_ */
