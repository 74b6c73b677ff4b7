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

// resilitest: command-line driver over the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "resilitest/resilitest.h"

namespace {

const char* OrNull(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int Check(rt_status status, const char* what) {
  if (status == RT_OK) return 0;
  std::fprintf(stderr, "resilitest %s: %s: %s\n", what, rt_status_name(status), rt_last_error());
  return 1;
}

std::size_t ParseTopK(const std::string& text) {
  if (text == "all") return 0;
  std::size_t used = 0;
  unsigned long long k = 0;
  try {
    k = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || k == 0) throw CLI::ValidationError("--top-k", "expected a positive integer or 'all'");
  return static_cast<std::size_t>(k);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilience testing for simulated microservice systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rt_version()));

  std::uint64_t seed = 0;
  std::string topology, workload, corpus, out, registry, weights, analysis, catalog, history,
      plan_dir, criteria, phases, top_k = "10";
  std::size_t n_services = 3, parallel = 1;
  bool entry_only = false, reset_history = false, bug_free = false, fail_on_vuln = false;
  std::vector<std::string> reports;

  auto* record = app.add_subcommand("record", "Run the healthy simulator under a workload and record a corpus");
  record->add_option("--topology", topology, "Topology file")->required()->check(CLI::ExistingFile);
  record->add_option("--workload", workload, "Workload script")->required()->check(CLI::ExistingFile);
  record->add_option("--seed", seed, "Seed");
  record->add_option("--out", out, "Corpus file to write")->required();

  auto* analyze = app.add_subcommand("analyze", "Cluster interfaces, build templates, rank traces");
  analyze->add_option("--corpus", corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--registry", registry, "Manual variable registry")->check(CLI::ExistingFile);
  analyze->add_option("--weights", weights, "Complexity weights w_len,w_div,w_dur");
  analyze->add_option("--out", out, "Output directory")->required();

  auto* plan = app.add_subcommand("plan", "Select top-K traces, plan fault targets and batch them into runs");
  plan->add_option("--corpus", corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  plan->add_option("--analysis", analysis, "Directory written by analyze")->required()->check(CLI::ExistingDirectory);
  plan->add_option("--topology", topology, "Topology file (async ground truth)")->check(CLI::ExistingFile);
  plan->add_option("--catalog", catalog, "Fault catalog (default: built-in)")->check(CLI::ExistingFile);
  plan->add_option("--top-k", top_k, "Number of interfaces, or 'all'");
  plan->add_option("--n-services", n_services, "Services sampled per endpoint")->check(CLI::PositiveNumber);
  plan->add_option("--seed", seed, "Seed");
  plan->add_option("--history", history, "Outcome history for history-aware selection");
  plan->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Execute a run plan and write the report");
  run->add_option("--plan", plan_dir, "Directory written by plan")->required()->check(CLI::ExistingDirectory);
  run->add_option("--analysis", analysis, "Directory written by analyze")->required()->check(CLI::ExistingDirectory);
  run->add_option("--topology", topology, "Topology file")->required()->check(CLI::ExistingFile);
  run->add_option("--catalog", catalog, "Fault catalog (default: built-in)")->check(CLI::ExistingFile);
  run->add_option("--criteria", criteria, "Criteria override file")->check(CLI::ExistingFile);
  run->add_option("--history", history, "Outcome history (created when missing)");
  run->add_flag("--reset-history", reset_history, "Start a new history epoch before running");
  run->add_flag("--entry-only-oracle", entry_only, "Judge by entry-point metrics only");
  run->add_flag("--bug-free", bug_free, "Run against the topology with every seeded bug fixed");
  run->add_option("--parallel", parallel, "Runs executed concurrently")->check(CLI::PositiveNumber);
  run->add_option("--phases", phases, "Phase seconds and rate: startup,inject,recover[@rps]");
  run->add_option("--seed", seed, "Seed");
  run->add_flag("--fail-on-vulnerability", fail_on_vuln, "Exit with status 2 when any case fails");
  run->add_option("--out", out, "Report file to write")->required();

  auto* report = app.add_subcommand("report", "Summarize reports; several give a sensitivity table");
  report->add_option("reports", reports, "Report files")->required()->check(CLI::ExistingFile);
  report->add_option("--topology", topology, "Topology file")->check(CLI::ExistingFile);

  auto* replay = app.add_subcommand("replay-check", "Replay every template once on a healthy system");
  replay->add_option("--topology", topology, "Topology file")->required()->check(CLI::ExistingFile);
  replay->add_option("--analysis", analysis, "Directory written by analyze")->required()->check(CLI::ExistingDirectory);
  replay->add_option("--seed", seed, "Seed");
  replay->add_option("--out", out, "Per-interface listing to write");

  auto* crit = app.add_subcommand("criteria", "Write the oracle criteria derived from the analysis");
  crit->add_option("--analysis", analysis, "Directory written by analyze")->required()->check(CLI::ExistingDirectory);
  crit->add_option("--criteria", criteria, "Override file applied on top")->check(CLI::ExistingFile);
  crit->add_option("--out", out, "Criteria file to write")->required();

  std::string iface, side = "req", key_path, kind = "opaque_copy", note;
  auto* reg = app.add_subcommand("registry", "Register or deregister a manual variable");
  reg->require_subcommand(1);
  for (const char* name : {"add", "remove"}) {
    auto* sub = reg->add_subcommand(name, std::string(name) + " an entry");
    sub->add_option("--registry", registry, "Registry file")->required();
    sub->add_option("--interface", iface, "Interface id")->required();
    sub->add_option("--side", side, "req or resp")->check(CLI::IsMember({"req", "resp"}));
    sub->add_option("--path", key_path, "Flattened key path")->required();
    if (std::string(name) == "add") {
      sub->add_option("--kind", kind, "fresh_id, timestamp or opaque_copy")
          ->check(CLI::IsMember({"fresh_id", "timestamp", "opaque_copy"}));
      sub->add_option("--note", note, "Provenance note");
    }
  }

  CLI11_PARSE(app, argc, argv);

  if (record->parsed()) {
    std::size_t n = 0;
    if (int rc = Check(rt_simulate_record(topology.c_str(), workload.c_str(), seed, out.c_str(), &n), "record")) return rc;
    std::printf("recorded %zu traces to %s\n", n, out.c_str());
  } else if (analyze->parsed()) {
    std::size_t n = 0;
    if (int rc = Check(rt_analyze(corpus.c_str(), OrNull(registry), OrNull(weights), out.c_str(), &n), "analyze")) return rc;
    std::printf("%zu interfaces analyzed into %s\n", n, out.c_str());
  } else if (plan->parsed()) {
    rt_plan_options po;
    rt_plan_options_init(&po);
    try {
      po.top_k = ParseTopK(top_k);
    } catch (const CLI::Error& e) {
      return app.exit(e);
    }
    po.n_services = n_services;
    po.seed = seed;
    po.catalog = OrNull(catalog);
    po.topology = OrNull(topology);
    po.history = OrNull(history);
    std::size_t n = 0;
    if (int rc = Check(rt_plan(corpus.c_str(), analysis.c_str(), &po, out.c_str(), &n), "plan")) return rc;
    std::printf("%zu test cases planned into %s\n", n, out.c_str());
  } else if (run->parsed()) {
    rt_run_options ro;
    rt_run_options_init(&ro);
    ro.seed = seed;
    ro.catalog = OrNull(catalog);
    ro.criteria = OrNull(criteria);
    ro.history = OrNull(history);
    ro.phases = OrNull(phases);
    ro.reset_history = reset_history;
    ro.entry_only_oracle = entry_only;
    ro.bug_free = bug_free;
    ro.parallel = parallel;
    rt_campaign_summary s;
    if (int rc = Check(rt_run(plan_dir.c_str(), analysis.c_str(), topology.c_str(), &ro, out.c_str(), &s), "run")) return rc;
    std::printf("%zu cases, %zu startups (%zu reschedules), %zu skipped\n", s.cases, s.startups,
                s.reschedules, s.skipped);
    std::size_t failures = 0;
    for (int v = 0; v < RT_VERDICT_COUNT; ++v) {
      std::printf("%s %zu\n", rt_verdict_name(static_cast<rt_verdict>(v)), s.verdicts[v]);
      if (v != RT_PASS) failures += s.verdicts[v];
    }
    if (fail_on_vuln && failures > 0) return 2;
  } else if (report->parsed()) {
    std::vector<const char*> paths;
    for (const auto& r : reports) paths.push_back(r.c_str());
    char* text = nullptr;
    if (int rc = Check(rt_report(paths.data(), paths.size(), OrNull(topology), &text), "report")) return rc;
    std::fputs(text, stdout);
    rt_string_free(text);
  } else if (replay->parsed()) {
    std::size_t total = 0, ok = 0;
    if (int rc = Check(rt_replay_check(topology.c_str(), analysis.c_str(), seed, OrNull(out), &total, &ok), "replay-check")) return rc;
    std::printf("replayed %zu/%zu interfaces successfully\n", ok, total);
  } else if (crit->parsed()) {
    if (int rc = Check(rt_derive_criteria(analysis.c_str(), OrNull(criteria), out.c_str()), "criteria")) return rc;
  } else if (reg->parsed()) {
    bool add = reg->get_subcommand("add")->parsed();
    if (int rc = Check(rt_registry_edit(registry.c_str(), add, iface.c_str(), side.c_str(), key_path.c_str(),
                                        kind.c_str(), OrNull(note)), "registry")) return rc;
  }
  return 0;
}
