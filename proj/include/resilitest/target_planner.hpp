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


// Injection-space pruning over selected traces.
//
// A target survives when it is the last invocation of its endpoint in the
// trace, is not the consumer side of a producer-consumer pair, is not the
// primary write of a dual-write pair, and its (endpoint, service) pair is in
// the cross-service sample. Surviving targets are crossed with the catalog;
// a (service, endpoint, fault) triple already planned for an earlier-ranked
// trace is not planned again.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "resilitest/fault_catalog.hpp"
#include "resilitest/trace.hpp"

namespace resilitest {

enum class Rationale { kLastInvocation, kProducer, kDualWriteSecondary, kPlain };

std::string_view RationaleName(Rationale r);
Rationale ParseRationale(std::string_view text);  // throws ParseError

struct InjectionTarget {
  std::string trace_id;
  std::size_t span_position = 0;
  Endpoint endpoint;
  std::string service;
  Rationale rationale = Rationale::kPlain;

  bool operator==(const InjectionTarget&) const = default;
};

struct TestCase {
  std::string case_id;
  std::string interface_id;
  InjectionTarget target;
  std::string fault_id;

  bool operator==(const TestCase&) const = default;
};

std::string CaseIdFor(const std::string& trace_id, std::size_t span_position,
                      const std::string& fault_id);

struct DependencyEdge {
  enum class Kind { kProducerConsumer, kDualWrite };
  Kind kind = Kind::kProducerConsumer;
  /// Producer-consumer: producer then consumer. Dual write: the two writes in
  /// trace order.
  std::size_t first = 0;
  std::size_t second = 0;
  /// Dual write only: the position marked secondary.
  std::size_t secondary = 0;
  std::set<std::string> shared_tokens;

  bool operator==(const DependencyEdge&) const = default;
};

inline constexpr std::size_t kMinTokenLen = 4;
bool IsWriteMethod(std::string_view method);

/// Ground-truth async flag for a span; may be empty.
using AsyncLookup = std::function<bool(const Span&)>;

std::vector<std::pair<std::size_t, Endpoint>> ExtractEndpoints(const Trace& trace);

/// endpoint -> services invoking it anywhere in the corpus.
using ServiceIndex = std::map<Endpoint, std::set<std::string>>;
ServiceIndex BuildServiceIndex(std::span<const Trace> traces);

std::set<std::string> SampleServices(const ServiceIndex& index, const Endpoint& endpoint,
                                     std::size_t n, std::uint64_t seed);
std::set<std::string> SampleServices(const Corpus& corpus, const Endpoint& endpoint,
                                     std::size_t n, std::uint64_t seed);

std::vector<InjectionTarget> LastInvocationTargets(const Trace& trace);
std::vector<DependencyEdge> DetectProducerConsumer(const Trace& trace,
                                                   std::size_t min_token_len = kMinTokenLen);
std::vector<DependencyEdge> DetectDualWrite(const Trace& trace, const AsyncLookup& is_async = {},
                                            std::size_t min_token_len = kMinTokenLen);

struct PlanConfig {
  std::size_t n_services = 3;
  std::uint64_t seed = 0;
  std::size_t min_token_len = kMinTokenLen;
  AsyncLookup is_async;
};

struct SelectedTrace {
  std::string interface_id;
  const Trace* trace = nullptr;
};

/// Positions of `trace` surviving rules 1-4, with their rationale.
std::vector<InjectionTarget> SurvivingTargets(const Trace& trace, const ServiceIndex& index,
                                              const PlanConfig& config);

/// `selected` in rank order. Throws ValidationError when empty.
std::vector<TestCase> PlanTargets(std::span<const SelectedTrace> selected, const Corpus& corpus,
                                  const FaultCatalog& catalog, const PlanConfig& config);
std::vector<TestCase> PlanTargets(std::span<const SelectedTrace> selected,
                                  const ServiceIndex& index, const FaultCatalog& catalog,
                                  const PlanConfig& config);

/// `case_id trace_id span_position endpoint service fault_id rationale interface_id`
std::string TestCaseToLine(const TestCase& tc);
TestCase TestCaseFromLine(std::string_view line, std::size_t line_no);
void WritePlan(std::ostream& out, std::span<const TestCase> cases);
std::vector<TestCase> ReadPlan(std::istream& in);

}  // namespace resilitest
