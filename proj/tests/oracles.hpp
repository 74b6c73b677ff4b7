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

// Brute-force reference implementations shared by the unit and acceptance
// tests. None of them calls the code they check.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "resilitest/common.hpp"
#include "resilitest/fault_catalog.hpp"
#include "resilitest/oracle.hpp"
#include "resilitest/scheduler.hpp"
#include "resilitest/target_planner.hpp"
#include "test_support.hpp"

namespace rt_test {

using resilitest::CoveragePair;
using resilitest::CoverageTrace;
using resilitest::FaultCatalog;
using resilitest::Rng;
using resilitest::RunMetrics;
using resilitest::ServiceIndex;
using resilitest::Thresholds;
using resilitest::Verdict;

// ---- pruning ---------------------------------------------------------------

inline std::set<std::string> LongValues(const Payload& p) {
  std::set<std::string> out;
  for (const auto& [k, v] : p) {
    if (v.size() >= resilitest::kMinTokenLen) out.insert(v);
  }
  return out;
}

inline bool SharesLongValue(const Payload& a, const Payload& b) {
  auto la = LongValues(a), lb = LongValues(b);
  for (const auto& v : la) {
    if (lb.count(v)) return true;
  }
  return false;
}

inline bool WriteSpan(const Span& s) {
  const std::string& m = s.endpoint.method;
  return m == "update" || m == "insert" || m == "delete" || m == "send" || m == "set" || m == "publish";
}

inline bool SameParentAndService(const Span& a, const Span& b) {
  return a.parent && b.parent && *a.parent == *b.parent && a.service == b.service;
}

/// Random trace with nested spans, shared tokens and repeated endpoints.
inline Trace RandomPlannerTrace(Rng& rng, const std::string& id) {
  static const Endpoint kEps[] = {
      Ep(Component::kDatabase, "jdbc", "query"), Ep(Component::kDatabase, "jdbc", "insert"),
      Ep(Component::kCache, "redis", "set"),     Ep(Component::kCache, "redis", "get"),
      Ep(Component::kMQ, "kafka", "send"),       Ep(Component::kRPC, "grpc", "call")};
  static const char* kTokens[] = {"ORD-1001", "ORD-1002", "USR-77", "ab", "PAY-9"};
  Trace t = MakeTrace(id);
  t.spans[0].dur_us = 100000;
  std::size_t n = 1 + rng.Below(9);
  for (std::size_t i = 0; i < n; ++i) {
    std::string parent = "r";
    if (t.spans.size() > 1 && rng.Below(4) == 0) parent = t.spans[1 + rng.Below(t.spans.size() - 1)].id;
    Payload req, resp;
    if (rng.Below(2)) req["k"] = kTokens[rng.Below(5)];
    if (rng.Below(3) == 0) req["j"] = kTokens[rng.Below(5)];
    if (rng.Below(2)) resp["v"] = kTokens[rng.Below(5)];
    t.spans.push_back(MakeSpan("s" + std::to_string(t.spans.size()), parent,
                               "svc" + std::to_string(rng.Below(2)), kEps[rng.Below(6)],
                               100 * t.spans.size(), 10, req, resp));
  }
  return t;
}

using PlannedTriple = std::tuple<std::string, std::size_t, std::string>;  // trace, position, fault

/// Every position checked against each pruning rule separately, then crossed
/// with the catalog; (service, endpoint, fault) triples are kept once.
inline std::vector<PlannedTriple> PruningOracle(const std::vector<Trace>& traces, const FaultCatalog& catalog,
                                                std::size_t n_services, std::uint64_t seed,
                                                const std::function<bool(const Span&)>& is_async) {
  ServiceIndex index;
  for (const auto& t : traces) {
    for (const auto& s : t.spans) {
      if (s.parent) index[s.endpoint].insert(s.service);
    }
  }
  std::set<std::tuple<std::string, Endpoint, std::string>> seen;
  std::vector<PlannedTriple> out;
  for (const auto& t : traces) {
    const auto& sp = t.spans;
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (!sp[p].parent) continue;
      bool last = true;
      for (std::size_t q = p + 1; q < sp.size(); ++q) {
        if (sp[q].endpoint == sp[p].endpoint) last = false;
      }
      if (!last) continue;
      bool consumer = false;
      for (std::size_t i = 0; i < p; ++i) {
        if (SameParentAndService(sp[i], sp[p]) && SharesLongValue(sp[i].resp, sp[p].req)) consumer = true;
      }
      if (consumer) continue;
      bool primary = false;
      for (std::size_t i = 0; i < sp.size(); ++i) {
        for (std::size_t j = i + 1; j < sp.size(); ++j) {
          if (!SameParentAndService(sp[i], sp[j]) || !WriteSpan(sp[i]) || !WriteSpan(sp[j])) continue;
          if (sp[i].endpoint.component == sp[j].endpoint.component) continue;
          if (!SharesLongValue(sp[i].req, sp[j].req)) continue;
          bool first_secondary = is_async && is_async(sp[i]) && !is_async(sp[j]);
          if ((first_secondary ? j : i) == p) primary = true;
        }
      }
      if (primary) continue;
      if (!resilitest::SampleServices(index, sp[p].endpoint, n_services, seed).count(sp[p].service)) continue;
      for (const auto& f : catalog.faults()) {
        if (!f.applies_to.Matches(sp[p].endpoint)) continue;
        if (!seen.emplace(sp[p].service, sp[p].endpoint, f.fault_id).second) continue;
        out.emplace_back(t.trace_id, p, f.fault_id);
      }
    }
  }
  return out;
}

// ---- set cover -------------------------------------------------------------

/// Smallest number of traces whose pairs include `need`, by subset enumeration.
inline std::size_t OptimalCover(const std::vector<CoverageTrace>& traces, const std::set<CoveragePair>& need) {
  std::size_t n = traces.size(), best = n + 1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::size_t size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (size >= best) continue;
    std::set<CoveragePair> got;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        for (const auto& [p, pos] : traces[i].pairs) got.insert(p);
      }
    }
    if (std::includes(got.begin(), got.end(), need.begin(), need.end())) best = size;
  }
  return best;
}

// ---- verdicts --------------------------------------------------------------

/// The five-verdict decision table, written out directly.
inline Verdict VerdictTable(const RunMetrics& m, const Thresholds& c, bool entry_only) {
  double s = *m.startup->entry.success_rate, i = *m.injection->entry.success_rate,
         r = *m.recovery->entry.success_rate;
  if (s < c.startup_min_success) return Verdict::kStartupFailure;
  if (entry_only) return r < c.recover_min_success ? Verdict::kFailNoRecovery : Verdict::kPass;
  if (m.injection->injection_hits == 0) return Verdict::kFailNoImpact;
  bool silent = i > c.inject_max_success && m.injection->endpoint_failures > 0 && !m.injection->downstream_ok;
  if (silent) return Verdict::kFailSilent;
  if (r < c.recover_min_success || m.recovery->endpoint_failures > 0) return Verdict::kFailNoRecovery;
  return Verdict::kPass;
}

inline resilitest::PhaseMetrics PhaseAt(double rate, std::uint64_t hits = 0, std::uint64_t failures = 0,
                                        bool downstream = true) {
  resilitest::PhaseMetrics p;
  p.entry.requests = 100;
  p.entry.completed = 100;
  p.entry.successes = static_cast<std::uint64_t>(rate * 100 + 0.5);
  p.entry.success_rate = rate;
  p.injection_hits = hits;
  p.endpoint_failures = failures;
  p.downstream_ok = downstream;
  return p;
}

inline RunMetrics MetricsAt(double s, double i, double r, std::uint64_t hits = 5, std::uint64_t inj_fail = 5,
                            bool downstream = true, std::uint64_t rec_fail = 0) {
  return {PhaseAt(s), PhaseAt(i, hits, inj_fail, downstream), PhaseAt(r, 0, rec_fail)};
}

}  // namespace rt_test
