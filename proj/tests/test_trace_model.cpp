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
#include <fstream>
#include <sstream>

#include "resilitest/common.hpp"
#include "resilitest/trace.hpp"
#include "test_support.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

bool HasRule(const std::vector<Violation>& report, const std::string& rule) {
  return std::any_of(report.begin(), report.end(), [&](const Violation& v) { return v.rule == rule; });
}

// Independent containment check: every child interval inside its parent's.
std::vector<std::string> ContainmentOracle(const Trace& t) {
  std::vector<std::string> bad;
  for (const auto& s : t.spans) {
    if (!s.parent) continue;
    for (const auto& p : t.spans) {
      if (p.id == *s.parent && (s.start_us < p.start_us || s.start_us + s.dur_us > p.start_us + p.dur_us)) {
        bad.push_back(s.id);
      }
    }
  }
  return bad;
}

Corpus GeneratedCorpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.metadata.seed = seed;
  c.metadata.topology_digest = "00ff00ff00ff00ff";
  for (std::size_t i = 0; i < n; ++i) {
    Trace t = MakeTrace("t" + std::to_string(i), "GET", "/svc/item/" + std::to_string(1000 + i));
    t.spans[0].start_us = 1'000'000 + i * 50;
    t.spans[0].req = {{"session_id", "s" + std::to_string(rng.Below(100000))}, {"a.b.c", "nested"}};
    t.spans[0].resp = {{"status", "ok"}};
    std::size_t kids = rng.Below(4);
    for (std::size_t k = 0; k < kids; ++k) {
      auto& s = AddChild(t, "svc" + std::to_string(rng.Below(3)),
                         Ep(Component::kDatabase, "sqlclient", k % 2 ? "update" : "select"),
                         {{"key", std::to_string(rng.Below(9999))}}, {{"rows", "1"}});
      s.start_us += t.spans[0].start_us;
      if (rng.Below(5) == 0) s.status = SpanStatus::Failed(500);
    }
    c.traces.push_back(std::move(t));
  }
  c.RefreshWindow();
  return c;
}

}  // namespace

TEST(TraceModel, SingleRootIsValid) {
  Trace t = MakeTrace("t1");
  EXPECT_TRUE(ValidateTrace(t).empty());
}

TEST(TraceModel, TwoParentlessSpansAreMultipleRoots) {
  Trace t = MakeTrace("t1");
  t.spans.push_back(MakeSpan("x", std::nullopt, "svc", Ep(Component::kCache, "kvclient", "get"), 0, 10));
  EXPECT_TRUE(HasRule(ValidateTrace(t), "multiple roots"));
}

TEST(TraceModel, ContainmentMatchesIndependentCheck) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Trace t = MakeTrace("t");
    for (int k = 0; k < 4; ++k) {
      auto& s = AddChild(t, "svc", Ep(Component::kCache, "kvclient", "get"));
      s.start_us = rng.Below(1100);
      s.dur_us = rng.Below(200);
    }
    std::sort(t.spans.begin() + 1, t.spans.end(),
              [](const Span& a, const Span& b) { return std::tie(a.start_us, a.id) < std::tie(b.start_us, b.id); });
    auto report = ValidateTrace(t);
    std::vector<std::string> flagged;
    for (const auto& v : report) {
      if (v.rule == "containment") flagged.push_back(v.span_id);
    }
    auto expected = ContainmentOracle(t);
    std::sort(flagged.begin(), flagged.end());
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(flagged, expected);
  }
}

TEST(TraceModel, ViolationsNameSpanAndRule) {
  Trace t = MakeTrace("t1");
  t.spans.push_back(MakeSpan("c", std::string("missing"), "svc", Ep(Component::kMQ, "mqclient", "send"), 5, 1));
  auto report = ValidateTrace(t);
  ASSERT_TRUE(HasRule(report, "dangling-parent"));
  EXPECT_EQ(report.front().span_id, "c");
}

TEST(TraceModel, ValidateIsPure) {
  Trace t = MakeTrace("t1");
  AddChild(t, "svc", Ep(Component::kDatabase, "sqlclient", "select")).dur_us = 5000;
  EXPECT_EQ(ValidateTrace(t), ValidateTrace(t));
}

TEST(TraceModel, EndpointTextRoundTrip) {
  Endpoint e = Ep(Component::kDatabase, "sqlclient", "update");
  EXPECT_EQ(e.ToString(), "Database/sqlclient/update");
  EXPECT_EQ(Endpoint::Parse(e.ToString()), e);
  EXPECT_THROW(Endpoint::Parse("Nope/x/y"), ParseError);
}

TEST(TraceModel, EmptyCorpusRoundTrip) {
  Corpus c;
  c.RefreshWindow();
  std::stringstream ss;
  WriteCorpus(ss, c);
  EXPECT_EQ(ReadCorpus(ss), c);
}

TEST(TraceModel, GeneratedCorpusRoundTrip) {
  TempDir dir("trace");
  Corpus c = GeneratedCorpus(1000, 5);
  SaveCorpus(c, dir.File("c.jsonl"));
  EXPECT_EQ(LoadCorpus(dir.File("c.jsonl")), c);
}

TEST(TraceModel, TruncatedFileFailsAtFinalRecord) {
  Corpus c = GeneratedCorpus(3, 9);
  std::stringstream ss;
  WriteCorpus(ss, c);
  std::string text = ss.str();
  text.resize(text.size() - 20);
  std::istringstream in(text);
  try {
    ReadCorpus(in);
    FAIL() << "truncated corpus loaded";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);  // header + 3 records
  }
}

TEST(TraceModel, VersionMismatchIsExplicit) {
  std::istringstream in("resilitest-corpus v9 seed=1 topology=00\n");
  EXPECT_THROW(ReadCorpus(in), VersionError);
}

TEST(TraceModel, DuplicateTraceIdRejected) {
  Corpus c = GeneratedCorpus(2, 1);
  c.traces[1].trace_id = c.traces[0].trace_id;
  std::stringstream ss;
  WriteCorpus(ss, c);
  EXPECT_THROW(ReadCorpus(ss), ParseError);
}

TEST(TraceModel, CanonicalOrderPutsParentsFirst) {
  Trace t = MakeTrace("t1");
  AddChild(t, "svc", Ep(Component::kRPC, "grpcclient", "invoke"));
  Span grandchild = MakeSpan("g", std::string("s1"), "svc2", Ep(Component::kCache, "kvclient", "get"), 12, 2);
  t.spans.insert(t.spans.begin(), grandchild);
  EXPECT_FALSE(ValidateTrace(t).empty());
  CanonicalizeOrder(t);
  EXPECT_EQ(t.spans[0].id, "r");
  EXPECT_TRUE(ValidateTrace(t).empty());
}
