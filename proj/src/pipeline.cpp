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

#include "resilitest/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace resilitest {

namespace fs = std::filesystem;

namespace {

std::string PathIn(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

std::unordered_map<std::string, const Trace*> IndexTraces(const Corpus& corpus) {
  std::unordered_map<std::string, const Trace*> by_id;
  for (const Trace& t : corpus.traces) by_id.emplace(t.trace_id, &t);
  return by_id;
}

const Trace& FindTrace(const std::unordered_map<std::string, const Trace*>& by_id,
                       const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw ValidationError("trace " + id + " is not in the corpus");
  return *it->second;
}

}  // namespace

Analysis Analyze(const Corpus& corpus, const ManualVariableRegistry& registry,
                 const ComplexityWeights& weights, const DrainParams& params) {
  if (corpus.traces.empty()) throw ValidationError("corpus has no traces");
  weights.Validate();
  Analysis a;
  a.clusters = ClusterInterfaces(corpus, params);
  auto scored = ScoreInterfaces(corpus, a.clusters, weights);
  a.ranked = SelectTopK(scored, scored.size());
  auto by_id = IndexTraces(corpus);
  for (std::size_t c = 0; c < a.clusters.size(); ++c) {
    const auto& cluster = a.clusters[c];
    const std::string rep_id = Representative(scored[c]).trace_id;
    std::vector<Trace> members;
    std::size_t rep = 0;
    std::size_t ok = 0;
    for (const auto& id : cluster.member_trace_ids) {
      const Trace& t = FindTrace(by_id, id);
      if (id == rep_id) rep = members.size();
      if (t.RootSpan().status.ok) ++ok;
      members.push_back(t);
    }
    TemplateOptions opts;
    opts.window = corpus.metadata.window;
    opts.representative = rep;
    a.templates.emplace(cluster.interface_id,
                        BuildTemplate(members, registry, cluster.interface_id, opts));
    a.healthy_success[cluster.interface_id] =
        static_cast<double>(ok) / static_cast<double>(members.size());
    a.factors[rep_id] = ComputeFactors(members[rep]);
  }
  return a;
}

void WriteAnalysis(const Analysis& a, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream clusters, templates, baseline, selection;
  WriteClusterReport(clusters, a.clusters);
  for (const auto& [id, t] : a.templates) templates << TemplateToJsonLine(t) << "\n";
  for (const auto& [id, rate] : a.healthy_success) baseline << id << " " << FormatFixed(rate) << "\n";
  WriteSelectionReport(selection, a.ranked, a.factors);
  WriteFile(PathIn(dir, "clusters.txt"), clusters.str());
  WriteFile(PathIn(dir, "templates.jsonl"), templates.str());
  WriteFile(PathIn(dir, "baseline.txt"), baseline.str());
  WriteFile(PathIn(dir, "selection.txt"), selection.str());
}

Analysis LoadAnalysis(const std::string& dir) {
  Analysis a;
  {
    std::istringstream in(ReadFile(PathIn(dir, "templates.jsonl")));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (Trim(line).empty()) continue;
      auto t = TemplateFromJsonLine(line, line_no);
      std::string id = t.interface_id;
      a.templates.emplace(std::move(id), std::move(t));
    }
  }
  {
    std::istringstream in(ReadFile(PathIn(dir, "baseline.txt")));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto w = SplitWhitespace(line);
      if (w.empty()) continue;
      if (w.size() != 2) throw ParseError("baseline line needs '<interface_id> <rate>'", line_no);
      try {
        a.healthy_success[w[0]] = std::stod(w[1]);
      } catch (const std::logic_error&) {
        throw ParseError("bad rate '" + w[1] + "'", line_no);
      }
    }
  }
  std::istringstream sel(ReadFile(PathIn(dir, "selection.txt")));
  a.ranked = ReadSelectionReport(sel);
  return a;
}

CampaignPlan Plan(const Corpus& corpus, std::span<const Selection> ranked,
                  const TopologySpec* topology, const FaultCatalog& catalog,
                  const PlanOptions& options, const History& history) {
  if (options.top_k == 0) throw ValidationError("top_k must be positive");
  CampaignPlan plan;
  plan.top_k = std::min(options.top_k, ranked.size());
  auto by_id = IndexTraces(corpus);

  PlanConfig config;
  config.n_services = options.n_services;
  config.seed = options.seed;
  if (topology) {
    config.is_async = [topology](const Span& s) {
      return topology->IsAsync(s.service, s.endpoint, s.op);
    };
  }
  const ServiceIndex index = BuildServiceIndex(corpus.traces);

  std::vector<SelectedTrace> chosen;
  if (history.empty()) {
    for (std::size_t i = 0; i < plan.top_k; ++i) {
      chosen.push_back({ranked[i].interface_id, &FindTrace(by_id, ranked[i].trace_id)});
    }
  } else {
    using Key = std::tuple<std::string, Endpoint, std::string>;
    std::set<Key> seen;
    for (const auto& sel : ranked) {
      if (chosen.size() == plan.top_k) break;
      SelectedTrace cand{sel.interface_id, &FindTrace(by_id, sel.trace_id)};
      auto cases = PlanTargets(std::span(&cand, 1), index, catalog, config);
      bool untested = false;
      std::vector<Key> fresh;
      for (const auto& tc : cases) {
        Key key{tc.target.service, tc.target.endpoint, tc.fault_id};
        if (seen.count(key)) continue;
        fresh.push_back(key);
        if (!history.PassedInEpoch(tc.case_id)) untested = true;
      }
      if (!untested) {
        plan.skipped_interfaces.push_back(sel.interface_id);
        continue;
      }
      seen.insert(fresh.begin(), fresh.end());
      chosen.push_back(cand);
    }
  }
  for (const auto& c : chosen) plan.interfaces.push_back(c.interface_id);
  if (chosen.empty()) return plan;

  plan.cases = PlanTargets(chosen, index, catalog, config);
  std::vector<CoverageTrace> coverage;
  for (const auto& c : chosen) coverage.push_back(CoverageOf(*c.trace, c.interface_id));
  plan.runs = GreedyBatch(plan.cases, coverage);
  return plan;
}

void WriteCampaignPlan(const CampaignPlan& plan, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream cases, runs, meta;
  WritePlan(cases, plan.cases);
  WriteRunPlan(runs, plan.runs);
  meta << "top_k " << plan.top_k << "\n";
  for (const auto& id : plan.interfaces) meta << "interface " << id << "\n";
  for (const auto& id : plan.skipped_interfaces) meta << "skipped " << id << "\n";
  WriteFile(PathIn(dir, "plan.txt"), cases.str());
  WriteFile(PathIn(dir, "runplan.txt"), runs.str());
  WriteFile(PathIn(dir, "meta.txt"), meta.str());
}

CampaignPlan LoadCampaignPlan(const std::string& dir) {
  CampaignPlan plan;
  {
    std::istringstream in(ReadFile(PathIn(dir, "plan.txt")));
    plan.cases = ReadPlan(in);
  }
  {
    std::istringstream in(ReadFile(PathIn(dir, "runplan.txt")));
    plan.runs = ReadRunPlan(in);
  }
  std::istringstream in(ReadFile(PathIn(dir, "meta.txt")));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto w = SplitWhitespace(line);
    if (w.empty()) continue;
    if (w.size() != 2) throw ParseError("malformed plan meta line", line_no);
    if (w[0] == "top_k") {
      try {
        plan.top_k = std::stoull(w[1]);
      } catch (const std::logic_error&) {
        throw ParseError("bad top_k '" + w[1] + "'", line_no);
      }
    } else if (w[0] == "interface") {
      plan.interfaces.push_back(w[1]);
    } else if (w[0] == "skipped") {
      plan.skipped_interfaces.push_back(w[1]);
    } else {
      throw ParseError("unknown plan meta key '" + w[0] + "'", line_no);
    }
  }
  return plan;
}

CampaignOutcome RunCampaign(const CampaignPlan& plan, const CampaignInputs& inputs,
                            const ExecutorConfig& config, History* history) {
  std::set<std::string> skip;
  if (history) {
    for (const auto& tc : FilterHistory(plan.cases, *history).skipped) skip.insert(tc.case_id);
  }
  RunPlan todo;
  for (const auto& run : plan.runs.runs) {
    Run kept{run.trace_id, run.interface_id, {}};
    for (const auto& tc : run.cases) {
      if (!skip.count(tc.case_id)) kept.cases.push_back(tc);
    }
    if (!kept.cases.empty()) todo.runs.push_back(std::move(kept));
  }
  CampaignOutcome out;
  out.result = RunBatch(todo, inputs, config);
  if (history) {
    for (const auto& r : out.result.runs) history->RecordOutcome(r.test_case.case_id, r.verdict);
  }
  out.summary = Summarize(out.result, *inputs.topology, plan.top_k, skip.size());
  return out;
}

std::string FormatReports(std::span<const ReportFile> reports, const TopologySpec* topology) {
  std::string out;
  if (reports.size() == 1) {
    const auto& s = reports[0].summary;
    out += fmt::format("top_k {}\ncases {} (skipped {})\nstartups {} (reschedules {})\n", s.top_k,
                       s.cases, s.skipped, s.startups, s.reschedules);
    for (const auto& [v, n] : s.verdicts) out += fmt::format("{} {}\n", VerdictName(v), n);
    out += fmt::format("covered pairs {}\n", s.covered_pairs.size());
    out += fmt::format("detected bugs {}/{}\n", s.detected_bugs.size(), s.seeded_bugs);
    for (const auto& b : s.detected_bugs) out += "  " + b + "\n";
    for (const auto& r : reports[0].runs) {
      if (r.verdict == Verdict::kPass) continue;
      out += fmt::format("{} {} {} {} {}\n", VerdictName(r.verdict), r.test_case.target.service,
                         r.test_case.target.endpoint.ToString(), r.test_case.fault_id,
                         r.test_case.case_id);
    }
    return out;
  }
  std::vector<const ReportFile*> sorted;
  for (const auto& r : reports) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const ReportFile* a, const ReportFile* b) {
    return a->summary.top_k < b->summary.top_k;
  });
  std::size_t seeded = topology ? topology->Bugs().size() : sorted.front()->summary.seeded_bugs;
  out += fmt::format("{:>6} {:>6} {:>6} {:>8} {:>8} {:>10} {:>5} {:>9}\n", "top_k", "cases",
                     "delta", "startups", "covered", "cum_cover", "bugs", "cum_bugs");
  std::set<std::string> cover, bugs;
  std::size_t prev = 0;
  for (const ReportFile* r : sorted) {
    const auto& s = r->summary;
    cover.insert(s.covered_pairs.begin(), s.covered_pairs.end());
    bugs.insert(s.detected_bugs.begin(), s.detected_bugs.end());
    long long delta = static_cast<long long>(s.cases) - static_cast<long long>(prev);
    prev = s.cases;
    out += fmt::format("{:>6} {:>6} {:>6} {:>8} {:>8} {:>10} {:>5} {:>5}/{:<3}\n", s.top_k, s.cases,
                       delta, s.startups, s.covered_pairs.size(), cover.size(),
                       s.detected_bugs.size(), bugs.size(), seeded);
  }
  return out;
}

ReplayOutcome CheckReplay(const TopologySpec& topology,
                          const std::map<std::string, TraceTemplate>& templates, std::uint64_t seed) {
  System sys(topology, seed);
  sys.AdvanceTo(kStartupCostUs);
  IdSource ids(MixSeed(seed, 2));
  InstantiationContext ctx;
  ctx.ids = &ids;
  ctx.resolve_opaque = [&sys](const std::string&, const EntryRequest& req) { return sys.Sign(req); };
  std::vector<std::pair<std::string, std::size_t>> tickets;
  for (const auto& [id, tmpl] : templates) {
    sys.AdvanceBy(100'000);
    ctx.now_us = sys.wall_us();
    tickets.emplace_back(id, sys.Submit(Instantiate(tmpl, ctx)));
  }
  sys.AdvanceBy(kEntryTimeoutUs + 1'000'000);
  ReplayOutcome out;
  for (const auto& [id, ticket] : tickets) {
    ++out.interfaces;
    int status = sys.Done(ticket) ? sys.Response(ticket).status : 0;
    bool ok = status >= 200 && status < 300;
    if (ok) {
      ++out.succeeded;
    } else {
      out.failed.push_back(id);
    }
    out.listing += fmt::format("{} {}\n", id, status);
  }
  return out;
}

std::set<std::string> ReachableBugs(const TopologySpec& topology, const Corpus& corpus) {
  std::set<std::pair<std::string, Endpoint>> pairs;
  for (const Trace& t : corpus.traces) {
    for (const Span& s : t.spans) pairs.emplace(s.service, s.endpoint);
  }
  std::set<std::string> out;
  for (const auto& b : topology.Bugs()) {
    if (pairs.count({b.service, b.endpoint})) out.insert(b.id);
  }
  return out;
}

}  // namespace resilitest
