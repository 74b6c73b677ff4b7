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

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "resilitest/common.hpp"
#include "resilitest/selection.hpp"
#include "test_support.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

Trace WithSpans(const std::string& id, std::size_t total) {
  Trace t = MakeTrace(id);
  while (t.spans.size() < total) AddChild(t, "svc", Ep(Component::kDatabase, "jdbc", "query"));
  return t;
}

Trace Random(Rng& rng, const std::string& id) {
  Trace t = MakeTrace(id);
  t.spans[0].dur_us = 1000 + rng.Below(100000);
  std::size_t n = rng.Below(12);
  for (std::size_t i = 0; i < n; ++i) {
    Component c = static_cast<Component>(rng.Below(5));
    AddChild(t, "svc" + std::to_string(rng.Below(6)), Ep(c, "fw" + std::to_string(rng.Below(3)), "m"));
  }
  return t;
}

std::vector<double> Scores(std::span<const Trace> traces, const ComplexityWeights& w) {
  CorpusNorms norms = CorpusNorms::FromTraces(traces);
  std::vector<double> out;
  for (const auto& t : traces) out.push_back(TraceComplexity(t, w, norms));
  return out;
}

}  // namespace

TEST(Selection, DegenerateCorpusScoresZero) {
  std::vector<Trace> traces{WithSpans("a", 3), WithSpans("b", 3), WithSpans("c", 3)};
  for (double s : Scores(traces, {})) EXPECT_DOUBLE_EQ(s, 0.0);
}

TEST(Selection, LengthOnlyWeights) {
  std::vector<Trace> traces{WithSpans("a", 2), WithSpans("b", 5), WithSpans("c", 8)};
  auto s = Scores(traces, ComplexityWeights::Parse("1,0,0"));
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(Selection, FactorsCountServicesAndComponentPairs) {
  Trace t = MakeTrace("a");
  t.spans[0].dur_us = 5000;
  AddChild(t, "orders", Ep(Component::kDatabase, "jdbc", "q"));
  AddChild(t, "orders", Ep(Component::kDatabase, "jdbc", "u"));
  AddChild(t, "pay", Ep(Component::kMQ, "kafka", "send"));
  TraceFactors f = ComputeFactors(t);
  EXPECT_EQ(f.spans, 4);
  // services {gateway, orders, pay} + pairs {HTTP/gateway, DB/jdbc, MQ/kafka}
  EXPECT_EQ(f.diversity, 6);
  EXPECT_EQ(f.duration, 5000);
}

TEST(Selection, AddingANewServiceSpanNeverLowersTheScore) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Trace> traces;
    for (int i = 0; i < 6; ++i) traces.push_back(Random(rng, "t" + std::to_string(i)));
    CorpusNorms norms = CorpusNorms::FromTraces(traces);
    Trace bigger = traces[0];
    AddChild(bigger, "brand-new", Ep(Component::kCache, "redis", "get"));
    // Keep norms fixed so only the trace changes.
    norms.spans.max = std::max(norms.spans.max, ComputeFactors(bigger).spans);
    norms.diversity.max = std::max(norms.diversity.max, ComputeFactors(bigger).diversity);
    ComplexityWeights w;
    EXPECT_GE(TraceComplexity(bigger, w, norms), TraceComplexity(traces[0], w, norms));
  }
}

TEST(Selection, InterfaceScoreIsTheMean) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + rng.Below(20));
    double sum = 0;
    for (auto& x : v) sum += (x = rng.Unit());
    EXPECT_NEAR(InterfaceScore(v), sum / v.size(), 1e-12);
    std::vector<double> shuffled = v;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_NEAR(InterfaceScore(shuffled), InterfaceScore(v), 1e-12);
  }
  EXPECT_EQ(InterfaceScore(std::vector<double>{}), 0.0);
}

TEST(Selection, ScoresIgnoreCorpusOrder) {
  Rng rng(8);
  std::vector<Trace> traces;
  for (int i = 0; i < 30; ++i) traces.push_back(Random(rng, "t" + std::to_string(i)));
  auto a = Scores(traces, {});
  std::vector<Trace> rev(traces.rbegin(), traces.rend());
  auto b = Scores(rev, {});
  std::reverse(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(Selection, DurationScoreInvariantUnderAffineRescale) {
  Rng rng(21);
  std::vector<Trace> traces;
  for (int i = 0; i < 20; ++i) traces.push_back(Random(rng, "t" + std::to_string(i)));
  auto w = ComplexityWeights::Parse("0,0,1");
  auto base = Scores(traces, w);
  for (auto& t : traces) t.spans[0].dur_us = 3 * t.spans[0].dur_us + 777;
  auto scaled = Scores(traces, w);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i], scaled[i], 1e-12);
}

TEST(Selection, TopKMatchesSortOracle) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredInterface> ifaces;
    std::size_t n = 1 + rng.Below(30);
    for (std::size_t i = 0; i < n; ++i) {
      ScoredInterface s;
      s.interface_id = "if" + std::to_string(rng.Below(1000)) + "_" + std::to_string(i);
      // Coarse scores so ties happen.
      std::size_t m = 1 + rng.Below(4);
      std::vector<double> scores;
      for (std::size_t j = 0; j < m; ++j) {
        double sc = rng.Below(5) / 4.0;
        scores.push_back(sc);
        s.members.push_back({"tr" + std::to_string(rng.Below(50)), sc});
      }
      s.aggregate = InterfaceScore(scores);
      ifaces.push_back(s);
    }
    std::size_t k = rng.Below(n + 5);
    auto got = SelectTopK(ifaces, k);

    auto oracle = ifaces;
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.aggregate != b.aggregate ? a.aggregate > b.aggregate : a.interface_id < b.interface_id;
    });
    oracle.resize(std::min(k, oracle.size()));
    ASSERT_EQ(got.size(), oracle.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].interface_id, oracle[i].interface_id);
      const ScoredMember* best = nullptr;
      for (const auto& m : oracle[i].members) {
        if (!best || m.score > best->score || (m.score == best->score && m.trace_id < best->trace_id)) {
          best = &m;
        }
      }
      EXPECT_EQ(got[i].trace_id, best->trace_id);
      EXPECT_EQ(got[i].trace_score, best->score);
    }
  }
}

TEST(Selection, WeightsValidation) {
  EXPECT_NO_THROW(ComplexityWeights{}.Validate());
  EXPECT_NO_THROW(ComplexityWeights::Parse("0.5,0.25,0.25"));
  EXPECT_THROW(ComplexityWeights::Parse("0.5,0.5,0.5"), ValidationError);
  EXPECT_THROW(ComplexityWeights::Parse("-0.5,1,0.5"), ValidationError);
  EXPECT_THROW(ComplexityWeights::Parse("1,0"), ValidationError);
  EXPECT_THROW(ComplexityWeights::Parse("a,b,c"), ValidationError);
}

TEST(Selection, ReportRoundTrip) {
  std::vector<Selection> ranked{{"aa", 0.75, "t1", 0.9}, {"bb", 0.5, "t2", 0.5}};
  std::map<std::string, TraceFactors> factors{{"t1", {5, 4, 1200}}, {"t2", {2, 2, 300}}};
  std::stringstream io;
  WriteSelectionReport(io, ranked, factors);
  auto back = ReadSelectionReport(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].interface_id, "aa");
  EXPECT_EQ(back[1].trace_id, "t2");
  EXPECT_NEAR(back[0].aggregate, 0.75, 1e-6);
}
