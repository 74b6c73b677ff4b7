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

#include "resilitest/executor.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

namespace resilitest {

using nlohmann::json;

void PhaseConfig::Validate() const {
  for (const PhaseSpec* p : {&startup, &injection, &recovery}) {
    if (p->duration_us == 0) throw ValidationError("phase duration must be positive");
    if (!(p->rate_rps > 0)) throw ValidationError("phase replay rate must be positive");
  }
}

PhaseConfig PhaseConfig::Parse(std::string_view text) {
  PhaseConfig config;
  std::string body(text);
  double rate = config.startup.rate_rps;
  if (auto at = body.find('@'); at != std::string::npos) {
    try {
      rate = std::stod(body.substr(at + 1));
    } catch (const std::logic_error&) {
      throw ParseError("bad phase rate in '" + std::string(text) + "'", 0);
    }
    body.resize(at);
  }
  auto parts = Split(body, ',');
  if (parts.size() != 3) throw ParseError("phases must be 'startup,inject,recover[@rps]'", 0);
  PhaseSpec* specs[] = {&config.startup, &config.injection, &config.recovery};
  for (int i = 0; i < 3; ++i) {
    double seconds = 0;
    try {
      seconds = std::stod(parts[i]);
    } catch (const std::logic_error&) {
      throw ParseError("bad phase duration '" + parts[i] + "'", 0);
    }
    if (seconds < 0) throw ValidationError("phase duration must be positive");
    specs[i]->duration_us = static_cast<std::uint64_t>(std::llround(seconds * 1e6));
    specs[i]->rate_rps = rate;
  }
  config.Validate();
  return config;
}

namespace {

/// Replays the template at the phase rate, then waits out the settle gap.
MetricsWindow Replay(System& sys, const TraceTemplate& tmpl, IdSource& ids, const PhaseSpec& phase,
                     std::uint64_t settle_us) {
  const std::uint64_t start = sys.now_us();
  const auto count = static_cast<std::uint64_t>(
      std::max(1.0, std::floor(static_cast<double>(phase.duration_us) * phase.rate_rps / 1e6)));
  const double interval = 1e6 / phase.rate_rps;
  InstantiationContext ctx;
  ctx.ids = &ids;
  ctx.resolve_opaque = [&sys](const std::string&, const EntryRequest& req) { return sys.Sign(req); };
  for (std::uint64_t i = 0; i < count; ++i) {
    sys.AdvanceTo(start + static_cast<std::uint64_t>(std::llround(interval * static_cast<double>(i))));
    ctx.now_us = sys.wall_us();
    sys.Submit(Instantiate(tmpl, ctx));
  }
  sys.AdvanceTo(start + phase.duration_us + settle_us);
  return {start, sys.now_us()};
}

PhaseMetrics Measure(const System& sys, const MetricsWindow& w, const TestCase* tc) {
  SystemMetrics m = sys.CollectMetrics(w);
  PhaseMetrics out;
  out.entry = m.entry;
  out.downstream_ok = m.downstream_ok();
  if (tc) out.endpoint_failures = m.At(tc->target.service, tc->target.endpoint).failures;
  return out;
}

void MarkStartupFailure(TestRun& r, const std::string& why) {
  r.verdict = Verdict::kStartupFailure;
  r.error = why;
}

}  // namespace

std::vector<TestRun> RunTest(const Run& run, std::size_t startup_index, const CampaignInputs& in,
                             const ExecutorConfig& config, std::vector<TestCase>& deferred) {
  std::vector<TestRun> out;
  if (run.cases.empty()) return out;
  const auto& phases = config.phases;
  auto it = in.templates->find(run.interface_id);
  const Thresholds& criteria = in.criteria->For(run.interface_id);
  const std::uint64_t seed = MixSeed(config.seed, Digest64(run.cases.front().case_id));
  IdSource ids(MixSeed(seed, 1));

  auto fail_all_from = [&](std::size_t i, const PhaseMetrics& startup, const std::string& why) {
    TestRun r;
    r.test_case = run.cases[i];
    r.startup = startup_index;
    r.startup_phase = startup;
    MarkStartupFailure(r, why);
    out.push_back(std::move(r));
    deferred.insert(deferred.end(), run.cases.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                    run.cases.end());
  };

  if (it == in.templates->end()) {
    fail_all_from(0, {}, "no template for interface " + run.interface_id);
    return out;
  }
  const TraceTemplate& tmpl = it->second;

  System sys(*in.topology, seed);
  PhaseMetrics startup;
  try {
    sys.AdvanceTo(kStartupCostUs);
    startup = Measure(sys, Replay(sys, tmpl, ids, phases.startup, phases.settle_us), nullptr);
  } catch (const Error& e) {
    fail_all_from(0, startup, e.what());
    return out;
  }

  for (std::size_t i = 0; i < run.cases.size(); ++i) {
    const TestCase& tc = run.cases[i];
    TestRun r;
    r.test_case = tc;
    r.startup = startup_index;
    r.startup_phase = startup;
    try {
      const FaultSpec* fault = in.catalog->Find(tc.fault_id);
      if (!fault) throw ValidationError("unknown fault " + tc.fault_id);
      const auto& svc = tc.target.service;
      const auto& ep = tc.target.endpoint;
      const std::uint64_t case_start = sys.now_us();
      const std::uint64_t hits_before = sys.Hits(svc, ep);
      sys.Arm(svc, ep, *fault);
      MetricsWindow inject = Replay(sys, tmpl, ids, phases.injection, phases.settle_us);
      const std::uint64_t hits = sys.Hits(svc, ep) - hits_before;
      sys.Disarm(svc, ep);
      MetricsWindow recover = Replay(sys, tmpl, ids, phases.recovery, phases.settle_us);

      r.injection_phase = Measure(sys, inject, &tc);
      r.injection_phase.injection_hits = hits;
      r.recovery_phase = Measure(sys, recover, &tc);
      r.bugs_triggered = sys.TriggeredBugs({case_start, sys.now_us()});
      RunMetrics metrics{r.startup_phase, r.injection_phase, r.recovery_phase};
      r.verdict = Evaluate(metrics, criteria, config.entry_only_oracle);
      sys.Compact(sys.now_us());
    } catch (const Error& e) {
      MarkStartupFailure(r, e.what());
    }
    const bool stop = r.verdict != Verdict::kPass;
    out.push_back(std::move(r));
    if (stop) {
      deferred.insert(deferred.end(), run.cases.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                      run.cases.end());
      break;
    }
  }
  return out;
}

CampaignResult RunBatch(const RunPlan& plan, const CampaignInputs& in, const ExecutorConfig& config) {
  config.phases.Validate();
  CampaignResult result;
  std::vector<Run> wave = plan.runs;
  bool first_wave = true;
  while (!wave.empty()) {
    const std::size_t n = wave.size();
    std::vector<std::vector<TestRun>> executed(n);
    std::vector<std::vector<TestCase>> deferred(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          executed[i] = RunTest(wave[i], result.startups + i, in, config, deferred[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(config.parallel, n));
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    result.startups += n;
    if (!first_wave) result.reschedules += n;
    first_wave = false;
    std::vector<Run> next_wave;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& r : executed[i]) result.runs.push_back(std::move(r));
      if (!deferred[i].empty()) {
        next_wave.push_back({wave[i].trace_id, wave[i].interface_id, std::move(deferred[i])});
      }
    }
    wave = std::move(next_wave);
  }
  return result;
}

std::size_t CampaignSummary::failures() const {
  std::size_t n = 0;
  for (const auto& [v, count] : verdicts) {
    if (v != Verdict::kPass) n += count;
  }
  return n;
}

CampaignSummary Summarize(const CampaignResult& result, const TopologySpec& topology,
                          std::size_t top_k, std::size_t skipped) {
  CampaignSummary s;
  s.top_k = top_k;
  s.cases = result.runs.size();
  s.startups = result.startups;
  s.reschedules = result.reschedules;
  s.skipped = skipped;
  for (Verdict v : kAllVerdicts) s.verdicts[v] = 0;
  for (const auto& r : result.runs) {
    ++s.verdicts[r.verdict];
    s.covered_pairs.insert(r.test_case.target.service + " " + r.test_case.target.endpoint.ToString());
    if (r.verdict != Verdict::kPass) s.detected_bugs.insert(r.bugs_triggered.begin(), r.bugs_triggered.end());
  }
  s.seeded_bugs = topology.Bugs().size();
  return s;
}

namespace {

json PhaseJson(const PhaseMetrics& p) {
  json j;
  j["requests"] = p.entry.requests;
  j["completed"] = p.entry.completed;
  j["successes"] = p.entry.successes;
  j["success_rate"] = p.entry.success_rate ? json(*p.entry.success_rate) : json(nullptr);
  j["p50_ms"] = p.entry.p50_ms;
  j["p95_ms"] = p.entry.p95_ms;
  j["throughput_rps"] = p.entry.throughput_rps;
  j["injection_hits"] = p.injection_hits;
  j["endpoint_failures"] = p.endpoint_failures;
  j["downstream_ok"] = p.downstream_ok;
  return j;
}

PhaseMetrics PhaseFromJson(const json& j) {
  PhaseMetrics p;
  p.entry.requests = j.at("requests").get<std::uint64_t>();
  p.entry.completed = j.at("completed").get<std::uint64_t>();
  p.entry.successes = j.at("successes").get<std::uint64_t>();
  if (!j.at("success_rate").is_null()) p.entry.success_rate = j.at("success_rate").get<double>();
  p.entry.p50_ms = j.at("p50_ms").get<double>();
  p.entry.p95_ms = j.at("p95_ms").get<double>();
  p.entry.throughput_rps = j.at("throughput_rps").get<double>();
  p.injection_hits = j.at("injection_hits").get<std::uint64_t>();
  p.endpoint_failures = j.at("endpoint_failures").get<std::uint64_t>();
  p.downstream_ok = j.at("downstream_ok").get<bool>();
  return p;
}

}  // namespace

void WriteReport(std::ostream& out, const CampaignResult& result, const CampaignSummary& s) {
  for (const auto& r : result.runs) {
    const auto& tc = r.test_case;
    json j;
    j["case_id"] = tc.case_id;
    j["interface_id"] = tc.interface_id;
    j["trace_id"] = tc.target.trace_id;
    j["span_position"] = tc.target.span_position;
    j["service"] = tc.target.service;
    j["endpoint"] = tc.target.endpoint.ToString();
    j["fault_id"] = tc.fault_id;
    j["rationale"] = std::string(RationaleName(tc.target.rationale));
    j["startup"] = r.startup;
    j["phases"] = {{"startup", PhaseJson(r.startup_phase)},
                   {"injection", PhaseJson(r.injection_phase)},
                   {"recovery", PhaseJson(r.recovery_phase)}};
    j["verdict"] = std::string(VerdictName(r.verdict));
    j["bugs_triggered"] = r.bugs_triggered;
    if (!r.error.empty()) j["error"] = r.error;
    out << j.dump() << "\n";
  }
  json sj;
  sj["top_k"] = s.top_k;
  sj["cases"] = s.cases;
  sj["startups"] = s.startups;
  sj["reschedules"] = s.reschedules;
  sj["skipped"] = s.skipped;
  json counts = json::object();
  for (const auto& [v, n] : s.verdicts) counts[std::string(VerdictName(v))] = n;
  sj["verdicts"] = counts;
  sj["covered_pairs"] = s.covered_pairs;
  sj["detected_bugs"] = s.detected_bugs;
  sj["seeded_bugs"] = s.seeded_bugs;
  out << json{{"summary", sj}}.dump() << "\n";
}

ReportFile ReadReport(std::istream& in) {
  ReportFile rf;
  bool have_summary = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    if (have_summary) throw ParseError("record after the summary line", line_no);
    try {
      json j = json::parse(line);
      if (j.contains("summary")) {
        const json& sj = j["summary"];
        auto& s = rf.summary;
        s.top_k = sj.at("top_k").get<std::size_t>();
        s.cases = sj.at("cases").get<std::size_t>();
        s.startups = sj.at("startups").get<std::size_t>();
        s.reschedules = sj.at("reschedules").get<std::size_t>();
        s.skipped = sj.at("skipped").get<std::size_t>();
        for (const auto& [name, n] : sj.at("verdicts").items()) {
          auto v = ParseVerdict(name);
          if (!v) throw ParseError("unknown verdict '" + name + "'", line_no);
          s.verdicts[*v] = n.get<std::size_t>();
        }
        s.covered_pairs = sj.at("covered_pairs").get<std::set<std::string>>();
        s.detected_bugs = sj.at("detected_bugs").get<std::set<std::string>>();
        s.seeded_bugs = sj.at("seeded_bugs").get<std::size_t>();
        have_summary = true;
        continue;
      }
      TestRun r;
      auto& tc = r.test_case;
      tc.case_id = j.at("case_id").get<std::string>();
      tc.interface_id = j.at("interface_id").get<std::string>();
      tc.target.trace_id = j.at("trace_id").get<std::string>();
      tc.target.span_position = j.at("span_position").get<std::size_t>();
      tc.target.service = j.at("service").get<std::string>();
      tc.target.endpoint = Endpoint::Parse(j.at("endpoint").get<std::string>());
      tc.fault_id = j.at("fault_id").get<std::string>();
      tc.target.rationale = ParseRationale(j.at("rationale").get<std::string>());
      r.startup = j.at("startup").get<std::size_t>();
      r.startup_phase = PhaseFromJson(j.at("phases").at("startup"));
      r.injection_phase = PhaseFromJson(j.at("phases").at("injection"));
      r.recovery_phase = PhaseFromJson(j.at("phases").at("recovery"));
      auto v = ParseVerdict(j.at("verdict").get<std::string>());
      if (!v) throw ParseError("unknown verdict", line_no);
      r.verdict = *v;
      r.bugs_triggered = j.at("bugs_triggered").get<std::vector<std::string>>();
      if (j.contains("error")) r.error = j["error"].get<std::string>();
      rf.runs.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad report record: ") + e.what(), line_no);
    }
  }
  if (!have_summary) throw ParseError("report has no summary line", line_no);
  return rf;
}

ReportFile LoadReport(const std::string& path) {
  std::istringstream in(ReadFile(path));
  return ReadReport(in);
}

}  // namespace resilitest
