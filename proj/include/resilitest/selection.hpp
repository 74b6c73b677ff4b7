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

// Trace complexity scoring and two-level top-K interface selection.

#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resilitest/aggregation.hpp"
#include "resilitest/trace.hpp"

namespace resilitest {

struct ComplexityWeights {
  double length = 1.0 / 3.0;
  double diversity = 1.0 / 3.0;
  double duration = 1.0 / 3.0;

  /// Throws ValidationError unless each weight is in [0,1] and they sum to 1.
  void Validate() const;
  /// "w_len,w_div,w_dur"
  static ComplexityWeights Parse(std::string_view text);
};

/// Raw factor values of one trace.
struct TraceFactors {
  double spans = 0;
  double diversity = 0;  // unique services + unique (component, framework) pairs
  double duration = 0;   // root span duration, microseconds
};

TraceFactors ComputeFactors(const Trace& trace);

struct FactorRange {
  double min = 0;
  double max = 0;
  /// Min-max normalization; a degenerate range maps to 0.
  double Normalize(double value) const;
};

struct CorpusNorms {
  FactorRange spans;
  FactorRange diversity;
  FactorRange duration;

  static CorpusNorms FromTraces(std::span<const Trace> traces);
  static CorpusNorms FromFactors(std::span<const TraceFactors> factors);
};

double TraceComplexity(const Trace& trace, const ComplexityWeights& weights,
                       const CorpusNorms& norms);
double TraceComplexity(const TraceFactors& factors, const ComplexityWeights& weights,
                       const CorpusNorms& norms);

/// Arithmetic mean; 0 for an empty span.
double InterfaceScore(std::span<const double> member_scores);

struct ScoredMember {
  std::string trace_id;
  double score = 0;
};

struct ScoredInterface {
  std::string interface_id;
  double aggregate = 0;
  std::vector<ScoredMember> members;
};

struct Selection {
  std::string interface_id;
  double aggregate = 0;
  std::string trace_id;  // representative: highest individual score
  double trace_score = 0;
};

/// Best member by score, ties to the smaller trace_id.
const ScoredMember& Representative(const ScoredInterface& scored);

/// Top-k by aggregate (ties: interface_id), each with its representative.
/// k larger than the number of interfaces returns all of them.
std::vector<Selection> SelectTopK(std::span<const ScoredInterface> interfaces, std::size_t k);

/// Scores every trace of every cluster against corpus-wide norms.
std::vector<ScoredInterface> ScoreInterfaces(const Corpus& corpus,
                                             const std::vector<InterfaceCluster>& clusters,
                                             const ComplexityWeights& weights);

/// Ranked report: rank, interface_id, aggregate, trace_id, trace score and
/// the representative's raw factors.
void WriteSelectionReport(std::ostream& out, std::span<const Selection> ranked,
                          const std::map<std::string, TraceFactors>& factors_by_trace);
std::vector<Selection> ReadSelectionReport(std::istream& in);

}  // namespace resilitest
