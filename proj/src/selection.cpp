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

#include "resilitest/selection.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>
#include <utility>

#include "resilitest/common.hpp"

namespace resilitest {

void ComplexityWeights::Validate() const {
  for (double w : {length, diversity, duration}) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("complexity weights must lie in [0,1]");
  }
  if (std::fabs(length + diversity + duration - 1.0) > 1e-9) {
    throw ValidationError("complexity weights must sum to 1");
  }
}

ComplexityWeights ComplexityWeights::Parse(std::string_view text) {
  auto parts = Split(text, ',');
  if (parts.size() != 3) throw ValidationError("weights must be w_len,w_div,w_dur");
  ComplexityWeights w;
  try {
    w.length = std::stod(parts[0]);
    w.diversity = std::stod(parts[1]);
    w.duration = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw ValidationError("weights must be numbers");
  }
  // Accept "1/3"-style rounding from the command line by renormalizing near-1 sums.
  double sum = w.length + w.diversity + w.duration;
  if (sum > 0 && std::fabs(sum - 1.0) < 1e-3) {
    w.length /= sum;
    w.diversity /= sum;
    w.duration /= sum;
  }
  w.Validate();
  return w;
}

TraceFactors ComputeFactors(const Trace& trace) {
  std::set<std::string_view> services;
  std::set<std::pair<Component, std::string_view>> infra;
  for (const Span& s : trace.spans) {
    services.insert(s.service);
    infra.emplace(s.endpoint.component, s.endpoint.framework);
  }
  TraceFactors f;
  f.spans = static_cast<double>(trace.spans.size());
  f.diversity = static_cast<double>(services.size() + infra.size());
  auto root = trace.IndexOf(trace.root);
  f.duration = root ? static_cast<double>(trace.spans[*root].dur_us) : 0.0;
  return f;
}

double FactorRange::Normalize(double value) const {
  if (max <= min) return 0.0;
  double n = (value - min) / (max - min);
  return std::clamp(n, 0.0, 1.0);
}

CorpusNorms CorpusNorms::FromFactors(std::span<const TraceFactors> factors) {
  CorpusNorms n;
  if (factors.empty()) return n;
  n.spans = {factors[0].spans, factors[0].spans};
  n.diversity = {factors[0].diversity, factors[0].diversity};
  n.duration = {factors[0].duration, factors[0].duration};
  for (const auto& f : factors) {
    n.spans = {std::min(n.spans.min, f.spans), std::max(n.spans.max, f.spans)};
    n.diversity = {std::min(n.diversity.min, f.diversity), std::max(n.diversity.max, f.diversity)};
    n.duration = {std::min(n.duration.min, f.duration), std::max(n.duration.max, f.duration)};
  }
  return n;
}

CorpusNorms CorpusNorms::FromTraces(std::span<const Trace> traces) {
  std::vector<TraceFactors> factors;
  factors.reserve(traces.size());
  for (const Trace& t : traces) factors.push_back(ComputeFactors(t));
  return FromFactors(factors);
}

double TraceComplexity(const TraceFactors& f, const ComplexityWeights& w, const CorpusNorms& n) {
  return w.length * n.spans.Normalize(f.spans) + w.diversity * n.diversity.Normalize(f.diversity) +
         w.duration * n.duration.Normalize(f.duration);
}

double TraceComplexity(const Trace& trace, const ComplexityWeights& weights,
                       const CorpusNorms& norms) {
  return TraceComplexity(ComputeFactors(trace), weights, norms);
}

double InterfaceScore(std::span<const double> member_scores) {
  if (member_scores.empty()) return 0.0;
  // Sorted summation keeps the mean independent of member order.
  std::vector<double> sorted(member_scores.begin(), member_scores.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  return sum / static_cast<double>(sorted.size());
}

const ScoredMember& Representative(const ScoredInterface& scored) {
  if (scored.members.empty()) throw ValidationError("interface " + scored.interface_id + " is empty");
  const ScoredMember* best = &scored.members.front();
  for (const auto& m : scored.members) {
    if (m.score > best->score || (m.score == best->score && m.trace_id < best->trace_id)) best = &m;
  }
  return *best;
}

std::vector<Selection> SelectTopK(std::span<const ScoredInterface> interfaces, std::size_t k) {
  std::vector<const ScoredInterface*> order;
  for (const auto& i : interfaces) {
    if (!i.members.empty()) order.push_back(&i);
  }
  std::sort(order.begin(), order.end(), [](const ScoredInterface* a, const ScoredInterface* b) {
    if (a->aggregate != b->aggregate) return a->aggregate > b->aggregate;
    return a->interface_id < b->interface_id;
  });
  if (k < order.size()) order.resize(k);
  std::vector<Selection> out;
  out.reserve(order.size());
  for (const ScoredInterface* i : order) {
    const ScoredMember& rep = Representative(*i);
    out.push_back({i->interface_id, i->aggregate, rep.trace_id, rep.score});
  }
  return out;
}

std::vector<ScoredInterface> ScoreInterfaces(const Corpus& corpus,
                                             const std::vector<InterfaceCluster>& clusters,
                                             const ComplexityWeights& weights) {
  std::unordered_map<std::string, TraceFactors> factors;
  std::vector<TraceFactors> all;
  all.reserve(corpus.traces.size());
  for (const Trace& t : corpus.traces) {
    auto f = ComputeFactors(t);
    factors.emplace(t.trace_id, f);
    all.push_back(f);
  }
  const CorpusNorms norms = CorpusNorms::FromFactors(all);
  std::vector<ScoredInterface> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    ScoredInterface si;
    si.interface_id = c.interface_id;
    std::vector<double> scores;
    for (const auto& id : c.member_trace_ids) {
      auto it = factors.find(id);
      if (it == factors.end()) continue;
      double s = TraceComplexity(it->second, weights, norms);
      si.members.push_back({id, s});
      scores.push_back(s);
    }
    si.aggregate = InterfaceScore(scores);
    out.push_back(std::move(si));
  }
  return out;
}

void WriteSelectionReport(std::ostream& out, std::span<const Selection> ranked,
                          const std::map<std::string, TraceFactors>& factors_by_trace) {
  out << "# rank interface_id aggregate trace_id trace_score spans diversity duration_us\n";
  std::size_t rank = 0;
  for (const auto& s : ranked) {
    TraceFactors f;
    if (auto it = factors_by_trace.find(s.trace_id); it != factors_by_trace.end()) f = it->second;
    out << ++rank << ' ' << s.interface_id << ' ' << FormatFixed(s.aggregate) << ' ' << s.trace_id
        << ' ' << FormatFixed(s.trace_score) << ' ' << FormatFixed(f.spans, 0) << ' '
        << FormatFixed(f.diversity, 0) << ' ' << FormatFixed(f.duration, 0) << '\n';
  }
}

std::vector<Selection> ReadSelectionReport(std::istream& in) {
  std::vector<Selection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = SplitWhitespace(t);
    if (f.size() < 5) throw ParseError("selection report row needs at least 5 fields", line_no);
    try {
      out.push_back({f[1], std::stod(f[2]), f[3], std::stod(f[4])});
    } catch (const std::exception&) {
      throw ParseError("bad number in selection report", line_no);
    }
  }
  return out;
}

}  // namespace resilitest
