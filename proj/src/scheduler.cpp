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


#include "resilitest/scheduler.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "resilitest/common.hpp"

namespace resilitest {

CoveragePair PairOf(const TestCase& tc) { return {tc.target.endpoint, tc.target.service}; }

CoverageTrace CoverageOf(const Trace& trace, const std::string& interface_id) {
  CoverageTrace c{trace.trace_id, interface_id, {}};
  for (std::size_t i = 0; i < trace.spans.size(); ++i) {
    const Span& s = trace.spans[i];
    if (s.parent) c.pairs[{s.endpoint, s.service}] = i;
  }
  return c;
}

std::size_t RunPlan::CaseCount() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.cases.size();
  return n;
}

RunPlan GreedyBatch(std::span<const TestCase> cases, std::span<const CoverageTrace> traces) {
  std::vector<const CoverageTrace*> candidates;
  {
    std::set<std::string> seen;
    for (const auto& t : traces) {
      if (seen.insert(t.trace_id).second) candidates.push_back(&t);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](auto* a, auto* b) { return a->trace_id < b->trace_id; });
  }
  std::map<CoveragePair, std::size_t> pending_per_pair;
  for (const auto& tc : cases) ++pending_per_pair[PairOf(tc)];
  std::vector<bool> done(cases.size(), false);
  std::size_t remaining = cases.size();

  RunPlan plan;
  while (remaining > 0) {
    const CoverageTrace* best = nullptr;
    std::size_t best_pairs = 0, best_cases = 0;
    for (const CoverageTrace* t : candidates) {
      std::size_t new_pairs = 0, absorbable = 0;
      for (const auto& [pair, pos] : t->pairs) {
        auto it = pending_per_pair.find(pair);
        if (it == pending_per_pair.end() || it->second == 0) continue;
        ++new_pairs;
        absorbable += it->second;
      }
      if (std::tie(new_pairs, absorbable) > std::tie(best_pairs, best_cases)) {
        best = t;
        best_pairs = new_pairs;
        best_cases = absorbable;
      }
    }
    if (best == nullptr) {
      for (std::size_t i = 0; i < cases.size(); ++i) {
        if (!done[i]) {
          throw ValidationError("no trace hosts case " + cases[i].case_id + " (" +
                                cases[i].target.endpoint.ToString() + " in " +
                                cases[i].target.service + ")");
        }
      }
    }
    Run run{best->trace_id, best->interface_id, {}};
    for (std::size_t i = 0; i < cases.size(); ++i) {
      if (done[i]) continue;
      auto pair = PairOf(cases[i]);
      auto hit = best->pairs.find(pair);
      if (hit == best->pairs.end()) continue;
      TestCase tc = cases[i];
      tc.target.trace_id = best->trace_id;
      tc.target.span_position = hit->second;
      tc.interface_id = best->interface_id;
      run.cases.push_back(std::move(tc));
      done[i] = true;
      --remaining;
      --pending_per_pair[pair];
    }
    plan.runs.push_back(std::move(run));
  }
  return plan;
}

void WriteRunPlan(std::ostream& out, const RunPlan& plan) {
  for (std::size_t i = 0; i < plan.runs.size(); ++i) {
    const Run& r = plan.runs[i];
    out << "run " << i << ' ' << r.trace_id << ' ' << r.interface_id << '\n';
    for (const auto& tc : r.cases) out << TestCaseToLine(tc) << '\n';
  }
}

RunPlan ReadRunPlan(std::istream& in) {
  RunPlan plan;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.rfind("run ", 0) == 0) {
      auto f = SplitWhitespace(t);
      if (f.size() != 4) throw ParseError("run header needs index, trace_id and interface_id", line_no);
      if (f[1] != std::to_string(plan.runs.size())) throw ParseError("runs out of order", line_no);
      plan.runs.push_back({f[2], f[3], {}});
      continue;
    }
    if (plan.runs.empty()) throw ParseError("test case before the first run header", line_no);
    TestCase tc = TestCaseFromLine(t, line_no);
    if (tc.target.trace_id != plan.runs.back().trace_id) {
      throw ParseError("case " + tc.case_id + " does not reference its run's trace", line_no);
    }
    plan.runs.back().cases.push_back(std::move(tc));
  }
  return plan;
}

void History::Apply(const Record& r) {
  if (r.verdict == "RESET") {
    epoch_ = r.epoch;
    current_.clear();
  } else {
    if (r.epoch != epoch_) throw ValidationError("history record outside the current epoch");
    auto v = ParseVerdict(r.verdict);
    if (!v) throw ValidationError("unknown verdict '" + r.verdict + "'");
    current_[r.case_id] = *v;
  }
  clock_ = std::max(clock_, r.timestamp);
  records_.push_back(r);
}

void History::RecordOutcome(const std::string& case_id, Verdict verdict) {
  Apply({epoch_, case_id, std::string(VerdictName(verdict)), clock_ + 1});
}

void History::Reset() { Apply({epoch_ + 1, "-", "RESET", clock_ + 1}); }

std::optional<Verdict> History::Lookup(const std::string& case_id) const {
  auto it = current_.find(case_id);
  if (it == current_.end()) return std::nullopt;
  return it->second;
}

bool History::PassedInEpoch(const std::string& case_id) const {
  auto v = Lookup(case_id);
  return v && *v == Verdict::kPass;
}

History History::Parse(std::istream& in) {
  History h;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = SplitWhitespace(t);
    if (f.size() != 4) throw ParseError("history record needs epoch, case_id, verdict, timestamp", line_no);
    try {
      Record r{std::stoull(f[0]), f[1], f[2], std::stoull(f[3])};
      if (r.verdict == "RESET" && r.epoch != h.epoch_ + 1) {
        throw ParseError("reset must open the next epoch", line_no);
      }
      h.Apply(r);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return h;
}

History History::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  return Parse(in);
}

void History::Write(std::ostream& out) const {
  for (const auto& r : records_) {
    out << r.epoch << ' ' << r.case_id << ' ' << r.verdict << ' ' << r.timestamp << '\n';
  }
}

void History::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  Write(out);
}

FilteredCases FilterHistory(std::span<const TestCase> cases, const History& history) {
  FilteredCases out;
  for (const auto& tc : cases) {
    (history.PassedInEpoch(tc.case_id) ? out.skipped : out.fresh).push_back(tc);
  }
  return out;
}

}  // namespace resilitest
