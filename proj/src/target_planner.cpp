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


#include "resilitest/target_planner.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>

#include "resilitest/common.hpp"

namespace resilitest {

namespace {

constexpr std::string_view kRationaleNames[] = {"last_invocation", "producer",
                                                "dual_write_secondary", "plain"};

std::set<std::string> LongValues(const Payload& payload, std::size_t min_len) {
  std::set<std::string> out;
  for (const auto& [k, v] : payload) {
    if (v.size() >= min_len) out.insert(v);
  }
  return out;
}

std::set<std::string> Intersect(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

bool Siblings(const Span& a, const Span& b) {
  return a.parent && b.parent && *a.parent == *b.parent && a.service == b.service;
}

}  // namespace

std::string_view RationaleName(Rationale r) { return kRationaleNames[static_cast<int>(r)]; }

Rationale ParseRationale(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (kRationaleNames[i] == text) return static_cast<Rationale>(i);
  }
  throw ParseError("unknown rationale '" + std::string(text) + "'", 0);
}

std::string CaseIdFor(const std::string& trace_id, std::size_t span_position,
                      const std::string& fault_id) {
  return HexDigest(trace_id + "|" + std::to_string(span_position) + "|" + fault_id);
}

bool IsWriteMethod(std::string_view method) {
  static const std::set<std::string, std::less<>> kWrites = {"update", "insert", "delete",
                                                             "send",   "set",    "publish"};
  return kWrites.count(method) > 0;
}

std::vector<std::pair<std::size_t, Endpoint>> ExtractEndpoints(const Trace& trace) {
  std::vector<std::pair<std::size_t, Endpoint>> out;
  for (std::size_t i = 0; i < trace.spans.size(); ++i) {
    if (trace.spans[i].parent) out.emplace_back(i, trace.spans[i].endpoint);
  }
  return out;
}

ServiceIndex BuildServiceIndex(std::span<const Trace> traces) {
  ServiceIndex index;
  for (const auto& t : traces) {
    for (const auto& s : t.spans) {
      if (s.parent) index[s.endpoint].insert(s.service);
    }
  }
  return index;
}

std::set<std::string> SampleServices(const ServiceIndex& index, const Endpoint& endpoint,
                                     std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ValidationError("n_services must be at least 1");
  auto it = index.find(endpoint);
  if (it == index.end()) return {};
  std::vector<std::string> services(it->second.begin(), it->second.end());
  if (services.size() <= n) return it->second;
  Rng rng(MixSeed(seed, Digest64(endpoint.ToString())));
  rng.Shuffle(services);
  return {services.begin(), services.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::set<std::string> SampleServices(const Corpus& corpus, const Endpoint& endpoint,
                                     std::size_t n, std::uint64_t seed) {
  return SampleServices(BuildServiceIndex(corpus.traces), endpoint, n, seed);
}

std::vector<InjectionTarget> LastInvocationTargets(const Trace& trace) {
  std::map<Endpoint, std::size_t> last;
  for (std::size_t i = 0; i < trace.spans.size(); ++i) {
    if (trace.spans[i].parent) last[trace.spans[i].endpoint] = i;
  }
  std::vector<std::size_t> positions;
  for (const auto& [e, i] : last) positions.push_back(i);
  std::sort(positions.begin(), positions.end());
  std::vector<InjectionTarget> out;
  for (auto i : positions) {
    const Span& s = trace.spans[i];
    out.push_back({trace.trace_id, i, s.endpoint, s.service, Rationale::kLastInvocation});
  }
  return out;
}

std::vector<DependencyEdge> DetectProducerConsumer(const Trace& trace, std::size_t min_token_len) {
  std::vector<DependencyEdge> edges;
  const auto& spans = trace.spans;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!spans[i].parent) continue;
    auto produced = LongValues(spans[i].resp, min_token_len);
    if (produced.empty()) continue;
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      if (!Siblings(spans[i], spans[j])) continue;
      auto shared = Intersect(produced, LongValues(spans[j].req, min_token_len));
      if (shared.empty()) continue;
      edges.push_back({DependencyEdge::Kind::kProducerConsumer, i, j, 0, std::move(shared)});
    }
  }
  return edges;
}

std::vector<DependencyEdge> DetectDualWrite(const Trace& trace, const AsyncLookup& is_async,
                                            std::size_t min_token_len) {
  std::vector<DependencyEdge> edges;
  const auto& spans = trace.spans;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!spans[i].parent || !IsWriteMethod(spans[i].endpoint.method)) continue;
    auto a = LongValues(spans[i].req, min_token_len);
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const Span& sj = spans[j];
      if (!Siblings(spans[i], sj) || !IsWriteMethod(sj.endpoint.method)) continue;
      if (sj.endpoint.component == spans[i].endpoint.component) continue;
      auto shared = Intersect(a, LongValues(sj.req, min_token_len));
      if (shared.empty()) continue;
      std::size_t secondary = j;
      if (is_async) {
        bool ai = is_async(spans[i]);
        bool aj = is_async(sj);
        if (ai && !aj) secondary = i;
      }
      edges.push_back({DependencyEdge::Kind::kDualWrite, i, j, secondary, std::move(shared)});
    }
  }
  return edges;
}

std::vector<InjectionTarget> SurvivingTargets(const Trace& trace, const ServiceIndex& index,
                                              const PlanConfig& config) {
  auto last = LastInvocationTargets(trace);
  auto pc = DetectProducerConsumer(trace, config.min_token_len);
  auto dw = DetectDualWrite(trace, config.is_async, config.min_token_len);

  std::set<std::size_t> producers, consumers, secondaries, primaries;
  for (const auto& e : pc) {
    producers.insert(e.first);
    consumers.insert(e.second);
  }
  for (const auto& e : dw) {
    secondaries.insert(e.secondary);
    primaries.insert(e.secondary == e.first ? e.second : e.first);
  }
  std::map<Endpoint, int> occurrences;
  for (const auto& s : trace.spans) {
    if (s.parent) ++occurrences[s.endpoint];
  }
  std::map<Endpoint, std::set<std::string>> sampled;

  std::vector<InjectionTarget> out;
  for (auto t : last) {
    if (consumers.count(t.span_position) || primaries.count(t.span_position)) continue;
    auto it = sampled.find(t.endpoint);
    if (it == sampled.end()) {
      it = sampled
               .emplace(t.endpoint,
                        SampleServices(index, t.endpoint, config.n_services, config.seed))
               .first;
    }
    if (!it->second.count(t.service)) continue;
    if (producers.count(t.span_position)) {
      t.rationale = Rationale::kProducer;
    } else if (secondaries.count(t.span_position)) {
      t.rationale = Rationale::kDualWriteSecondary;
    } else if (occurrences[t.endpoint] > 1) {
      t.rationale = Rationale::kLastInvocation;
    } else {
      t.rationale = Rationale::kPlain;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TestCase> PlanTargets(std::span<const SelectedTrace> selected,
                                  const ServiceIndex& index, const FaultCatalog& catalog,
                                  const PlanConfig& config) {
  if (selected.empty()) throw ValidationError("plan_targets needs a non-empty selection");
  std::set<std::tuple<std::string, Endpoint, std::string>> planned;
  std::set<std::string> case_ids;
  std::vector<TestCase> cases;
  for (const auto& sel : selected) {
    for (const auto& target : SurvivingTargets(*sel.trace, index, config)) {
      for (const FaultSpec* fault : catalog.FaultsFor(target.endpoint)) {
        if (!planned.emplace(target.service, target.endpoint, fault->fault_id).second) continue;
        TestCase tc;
        tc.case_id = CaseIdFor(target.trace_id, target.span_position, fault->fault_id);
        if (!case_ids.insert(tc.case_id).second) {
          throw ValidationError("case id collision for " + tc.case_id);
        }
        tc.interface_id = sel.interface_id;
        tc.target = target;
        tc.fault_id = fault->fault_id;
        cases.push_back(std::move(tc));
      }
    }
  }
  return cases;
}

std::vector<TestCase> PlanTargets(std::span<const SelectedTrace> selected, const Corpus& corpus,
                                  const FaultCatalog& catalog, const PlanConfig& config) {
  return PlanTargets(selected, BuildServiceIndex(corpus.traces), catalog, config);
}

std::string TestCaseToLine(const TestCase& tc) {
  return tc.case_id + " " + tc.target.trace_id + " " + std::to_string(tc.target.span_position) +
         " " + tc.target.endpoint.ToString() + " " + tc.target.service + " " + tc.fault_id + " " +
         std::string(RationaleName(tc.target.rationale)) + " " + tc.interface_id;
}

TestCase TestCaseFromLine(std::string_view line, std::size_t line_no) {
  auto f = SplitWhitespace(line);
  if (f.size() != 8) throw ParseError("test case record needs 8 fields", line_no);
  try {
    TestCase tc;
    tc.case_id = f[0];
    tc.target.trace_id = f[1];
    std::size_t used = 0;
    tc.target.span_position = std::stoul(f[2], &used);
    if (used != f[2].size()) throw ParseError("bad span position", 0);
    tc.target.endpoint = Endpoint::Parse(f[3]);
    tc.target.service = f[4];
    tc.fault_id = f[5];
    tc.target.rationale = ParseRationale(f[6]);
    tc.interface_id = f[7];
    return tc;
  } catch (const ParseError& e) {
    throw ParseError(e.what(), line_no);
  } catch (const std::exception&) {
    throw ParseError("bad span position '" + f[2] + "'", line_no);
  }
}

void WritePlan(std::ostream& out, std::span<const TestCase> cases) {
  out << "# case_id trace_id span_position endpoint service fault_id rationale interface_id\n";
  for (const auto& tc : cases) out << TestCaseToLine(tc) << '\n';
}

std::vector<TestCase> ReadPlan(std::istream& in) {
  std::vector<TestCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    cases.push_back(TestCaseFromLine(t, line_no));
  }
  return cases;
}

}  // namespace resilitest
