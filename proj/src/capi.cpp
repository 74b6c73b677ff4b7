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

#include "resilitest/resilitest.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "resilitest/pipeline.hpp"

using namespace resilitest;

struct rt_system {
  TopologySpec topology;
  std::unique_ptr<System> sys;
  std::map<std::string, FaultCatalog> catalogs;
};

namespace {

thread_local std::string g_last_error;

rt_status Fail(rt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
rt_status Guard(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const InsufficientEvidence& e) {
    return Fail(RT_ERR_INSUFFICIENT_EVIDENCE, e.what());
  } catch (const ParseError& e) {
    return Fail(RT_ERR_PARSE, e.what());
  } catch (const VersionError& e) {
    return Fail(RT_ERR_VERSION, e.what());
  } catch (const ValidationError& e) {
    return Fail(RT_ERR_VALIDATION, e.what());
  } catch (const IoError& e) {
    return Fail(RT_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(RT_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(RT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(RT_ERR_INTERNAL, e.what());
  }
}

#define RT_REQUIRE(cond, what) \
  if (!(cond)) return Fail(RT_ERR_INVALID_ARGUMENT, what)

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

FaultCatalog CatalogFrom(const char* path) {
  return path ? FaultCatalog::Load(path) : FaultCatalog::BuiltIn();
}

}  // namespace

extern "C" {

const char* rt_version(void) { return "1.0.0"; }

const char* rt_status_name(rt_status status) {
  switch (status) {
    case RT_OK: return "ok";
    case RT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RT_ERR_PARSE: return "parse error";
    case RT_ERR_VERSION: return "version mismatch";
    case RT_ERR_VALIDATION: return "validation error";
    case RT_ERR_IO: return "i/o error";
    case RT_ERR_INSUFFICIENT_EVIDENCE: return "insufficient evidence";
    case RT_ERR_NOT_FOUND: return "not found";
    case RT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* rt_verdict_name(rt_verdict verdict) {
  if (static_cast<int>(verdict) < 0 || static_cast<int>(verdict) >= RT_VERDICT_COUNT) return "UNKNOWN";
  return VerdictName(static_cast<Verdict>(verdict)).data();
}

const char* rt_last_error(void) { return g_last_error.c_str(); }

void rt_string_free(char* text) { std::free(text); }

rt_status rt_simulate_record(const char* topology_path, const char* workload_path, uint64_t seed,
                             const char* corpus_out, size_t* traces_out) {
  RT_REQUIRE(topology_path && workload_path && corpus_out, "null path");
  return Guard([&] {
    auto spec = LoadTopology(topology_path);
    auto workload = LoadWorkload(workload_path);
    Corpus corpus = SimulateRecord(spec, workload, seed);
    SaveCorpus(corpus, corpus_out);
    if (traces_out) *traces_out = corpus.traces.size();
    return RT_OK;
  });
}

rt_status rt_analyze(const char* corpus_path, const char* registry_path, const char* weights,
                     const char* out_dir, size_t* interfaces_out) {
  RT_REQUIRE(corpus_path && out_dir, "null path");
  return Guard([&] {
    Corpus corpus = LoadCorpus(corpus_path);
    ManualVariableRegistry registry;
    if (registry_path) registry = ManualVariableRegistry::Load(registry_path);
    ComplexityWeights w = weights ? ComplexityWeights::Parse(weights) : ComplexityWeights{};
    Analysis a = Analyze(corpus, registry, w);
    WriteAnalysis(a, out_dir);
    if (interfaces_out) *interfaces_out = a.clusters.size();
    return RT_OK;
  });
}

void rt_plan_options_init(rt_plan_options* options) {
  if (!options) return;
  *options = rt_plan_options{};
  options->top_k = 10;
  options->n_services = 3;
}

rt_status rt_plan(const char* corpus_path, const char* analysis_dir, const rt_plan_options* options,
                  const char* out_dir, size_t* cases_out) {
  RT_REQUIRE(corpus_path && analysis_dir && options && out_dir, "null argument");
  RT_REQUIRE(options->n_services > 0, "n_services must be positive");
  return Guard([&] {
    Corpus corpus = LoadCorpus(corpus_path);
    Analysis a = LoadAnalysis(analysis_dir);
    FaultCatalog catalog = CatalogFrom(options->catalog);
    std::unique_ptr<TopologySpec> topology;
    if (options->topology) topology = std::make_unique<TopologySpec>(LoadTopology(options->topology));
    History history;
    if (options->history) history = History::Load(options->history);
    PlanOptions po;
    po.top_k = options->top_k == 0 ? kAllInterfaces : options->top_k;
    po.n_services = options->n_services;
    po.seed = options->seed;
    CampaignPlan plan = Plan(corpus, a.ranked, topology.get(), catalog, po, history);
    WriteCampaignPlan(plan, out_dir);
    if (cases_out) *cases_out = plan.cases.size();
    return RT_OK;
  });
}

void rt_run_options_init(rt_run_options* options) {
  if (!options) return;
  *options = rt_run_options{};
  options->parallel = 1;
}

rt_status rt_run(const char* plan_dir, const char* analysis_dir, const char* topology_path,
                 const rt_run_options* options, const char* report_out,
                 rt_campaign_summary* summary_out) {
  RT_REQUIRE(plan_dir && analysis_dir && topology_path && options && report_out, "null argument");
  return Guard([&] {
    CampaignPlan plan = LoadCampaignPlan(plan_dir);
    Analysis a = LoadAnalysis(analysis_dir);
    TopologySpec topology = LoadTopology(topology_path);
    if (options->bug_free) topology = topology.WithoutBugs();
    FaultCatalog catalog = CatalogFrom(options->catalog);
    OracleCriteria criteria = DeriveCriteria(a.healthy_success);
    if (options->criteria) criteria = OracleCriteria::Load(options->criteria, criteria);

    ExecutorConfig config;
    config.seed = options->seed;
    config.entry_only_oracle = options->entry_only_oracle != 0;
    config.parallel = options->parallel == 0 ? 1 : options->parallel;
    if (options->phases) config.phases = PhaseConfig::Parse(options->phases);

    History history;
    if (options->history) {
      history = History::Load(options->history);
      if (options->reset_history) history.Reset();
    }
    CampaignInputs inputs{&topology, &catalog, &a.templates, &criteria};
    CampaignOutcome out = RunCampaign(plan, inputs, config, options->history ? &history : nullptr);
    std::ostringstream report;
    WriteReport(report, out.result, out.summary);
    WriteFile(report_out, report.str());
    if (options->history) history.Save(options->history);

    if (summary_out) {
      const auto& s = out.summary;
      *summary_out = rt_campaign_summary{};
      summary_out->top_k = s.top_k;
      summary_out->cases = s.cases;
      summary_out->skipped = s.skipped;
      summary_out->startups = s.startups;
      summary_out->reschedules = s.reschedules;
      for (const auto& [v, n] : s.verdicts) summary_out->verdicts[static_cast<int>(v)] = n;
      summary_out->covered_pairs = s.covered_pairs.size();
      summary_out->detected_bugs = s.detected_bugs.size();
      summary_out->seeded_bugs = s.seeded_bugs;
    }
    return RT_OK;
  });
}

rt_status rt_report(const char* const* report_paths, size_t count, const char* topology_path,
                    char** text_out) {
  RT_REQUIRE(report_paths && count > 0 && text_out, "need at least one report");
  return Guard([&] {
    std::vector<ReportFile> reports;
    for (size_t i = 0; i < count; ++i) {
      if (!report_paths[i]) return Fail(RT_ERR_INVALID_ARGUMENT, "null report path");
      reports.push_back(LoadReport(report_paths[i]));
    }
    std::unique_ptr<TopologySpec> topology;
    if (topology_path) topology = std::make_unique<TopologySpec>(LoadTopology(topology_path));
    *text_out = Dup(FormatReports(reports, topology.get()));
    return RT_OK;
  });
}

rt_status rt_replay_check(const char* topology_path, const char* analysis_dir, uint64_t seed,
                          const char* listing_out, size_t* total_out, size_t* succeeded_out) {
  RT_REQUIRE(topology_path && analysis_dir, "null path");
  return Guard([&] {
    TopologySpec topology = LoadTopology(topology_path);
    Analysis a = LoadAnalysis(analysis_dir);
    ReplayOutcome out = CheckReplay(topology, a.templates, seed);
    if (listing_out) WriteFile(listing_out, out.listing);
    if (total_out) *total_out = out.interfaces;
    if (succeeded_out) *succeeded_out = out.succeeded;
    return RT_OK;
  });
}

rt_status rt_derive_criteria(const char* analysis_dir, const char* overrides_path,
                             const char* out_path) {
  RT_REQUIRE(analysis_dir && out_path, "null path");
  return Guard([&] {
    Analysis a = LoadAnalysis(analysis_dir);
    OracleCriteria criteria = DeriveCriteria(a.healthy_success);
    if (overrides_path) criteria = OracleCriteria::Load(overrides_path, criteria);
    std::ostringstream out;
    criteria.Write(out);
    WriteFile(out_path, out.str());
    return RT_OK;
  });
}

rt_status rt_registry_edit(const char* registry_path, int add, const char* interface_id,
                           const char* side, const char* key_path, const char* kind,
                           const char* note) {
  RT_REQUIRE(registry_path && interface_id && side && key_path, "null argument");
  RT_REQUIRE(!add || kind, "kind required when adding");
  return Guard([&] {
    ManualVariableRegistry registry;
    if (std::filesystem::exists(registry_path)) registry = ManualVariableRegistry::Load(registry_path);
    PayloadSide s = ParseSide(side);
    if (add) {
      registry.Register({interface_id, s, key_path, ParseKind(kind)}, note ? note : "");
    } else {
      registry.Deregister(interface_id, s, key_path);
    }
    std::ostringstream out;
    registry.Write(out);
    WriteFile(registry_path, out.str());
    return RT_OK;
  });
}

rt_status rt_system_start(const char* topology_path, uint64_t seed, int bug_free,
                          rt_system** system_out) {
  RT_REQUIRE(topology_path && system_out, "null argument");
  *system_out = nullptr;
  return Guard([&] {
    auto handle = std::make_unique<rt_system>();
    handle->topology = LoadTopology(topology_path);
    if (bug_free) handle->topology = handle->topology.WithoutBugs();
    handle->sys = std::make_unique<System>(handle->topology, seed);
    *system_out = handle.release();
    return RT_OK;
  });
}

void rt_system_free(rt_system* system) { delete system; }

rt_status rt_system_now(const rt_system* system, uint64_t* virtual_us_out) {
  RT_REQUIRE(system && virtual_us_out, "null argument");
  *virtual_us_out = system->sys->now_us();
  g_last_error.clear();
  return RT_OK;
}

rt_status rt_system_advance(rt_system* system, uint64_t virtual_us) {
  RT_REQUIRE(system, "null system");
  return Guard([&] {
    system->sys->AdvanceTo(virtual_us);
    return RT_OK;
  });
}

rt_status rt_system_submit(rt_system* system, const char* method, const char* uri,
                           const char* payload_json, size_t* ticket_out) {
  RT_REQUIRE(system && method && uri && ticket_out, "null argument");
  return Guard([&] {
    EntryRequest req;
    req.method = method;
    req.uri = uri;
    if (payload_json) req.payload = FlattenJson(payload_json);
    *ticket_out = system->sys->Submit(req);
    return RT_OK;
  });
}

rt_status rt_system_response(const rt_system* system, size_t ticket, int* status_out,
                             char** body_json_out) {
  RT_REQUIRE(system && status_out, "null argument");
  return Guard([&] {
    if (!system->sys->Done(ticket)) return Fail(RT_ERR_NOT_FOUND, "request still in flight");
    const EntryResponse& resp = system->sys->Response(ticket);
    *status_out = resp.status;
    if (body_json_out) {
      nlohmann::json body = nlohmann::json::object();
      for (const auto& [k, v] : resp.body) body[k] = v;
      *body_json_out = Dup(body.dump());
    }
    return RT_OK;
  });
}

rt_status rt_system_arm(rt_system* system, const char* service, const char* endpoint,
                        const char* catalog_path, const char* fault_id) {
  RT_REQUIRE(system && service && endpoint && fault_id, "null argument");
  return Guard([&] {
    std::string key = catalog_path ? catalog_path : "";
    auto it = system->catalogs.find(key);
    if (it == system->catalogs.end()) it = system->catalogs.emplace(key, CatalogFrom(catalog_path)).first;
    const FaultSpec* fault = it->second.Find(fault_id);
    if (!fault) return Fail(RT_ERR_NOT_FOUND, std::string("unknown fault ") + fault_id);
    system->sys->Arm(service, Endpoint::Parse(endpoint), *fault);
    return RT_OK;
  });
}

rt_status rt_system_disarm(rt_system* system, const char* service, const char* endpoint) {
  RT_REQUIRE(system && service && endpoint, "null argument");
  return Guard([&] {
    system->sys->Disarm(service, Endpoint::Parse(endpoint));
    return RT_OK;
  });
}

}  // extern "C"
