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

#include <chrono>
#include <set>
#include <sstream>

#include "resilitest/common.hpp"
#include "resilitest/templating.hpp"
#include "test_support.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

Span LoginSpan(const std::string& session) {
  Span s = MakeSpan("r", std::nullopt, "gateway", Ep(Component::kHTTP, "gateway", "POST"), 0, 100);
  s.op = "POST /api/login";
  s.req = {{"session_id", session}, {"domain_id", "shop-eu"}};
  s.resp = {{"session_id", session}, {"domain_id", "shop-eu"}, {"status", "ok"}};
  return s;
}

Trace LoginTrace(const std::string& id, const std::string& session) {
  Trace t;
  t.trace_id = id;
  t.root = "r";
  t.spans.push_back(LoginSpan(session));
  return t;
}

// Stage 1 by explicit pairwise comparison.
std::set<std::string> CandidateOracle(const Span& s) {
  std::set<std::string> out;
  for (const auto& [rk, rv] : s.req) {
    for (const auto& [pk, pv] : s.resp) {
      if (rv == pv) out.insert(rk);
    }
  }
  return out;
}

Span RandomSpan(Rng& rng) {
  Span s;
  const char* values[] = {"aa", "bb", "cc", "dd"};
  for (int i = 0; i < 4; ++i) {
    if (rng.Below(2)) s.req["k" + std::to_string(i)] = values[rng.Below(4)];
    if (rng.Below(2)) s.resp["k" + std::to_string(i)] = values[rng.Below(4)];
  }
  return s;
}

// Echo server used for the fixpoint check: responses echo the request.
Trace Replayed(const TraceTemplate& tmpl, const EntryRequest& req, const std::string& id) {
  Trace t = tmpl.base_trace;
  t.trace_id = id;
  Span& root = t.spans[*t.IndexOf(t.root)];
  root.req = req.payload;
  root.resp = req.payload;
  root.resp["status"] = "ok";
  return t;
}

}  // namespace

TEST(Templating, IntraspanLoginExample) {
  Span s;
  s.req = {{"session_id", "f7k9q2"}};
  s.resp = {{"session_id", "f7k9q2"}, {"status", "ok"}};
  EXPECT_EQ(FindIntraspanCandidates(s), (std::set<std::string>{"session_id"}));
}

TEST(Templating, IntraspanNoSharedValue) {
  Span s;
  s.req = {{"a", "1"}};
  s.resp = {{"b", "2"}};
  EXPECT_TRUE(FindIntraspanCandidates(s).empty());
}

TEST(Templating, IntraspanMatchesByValue) {
  Span s;
  s.req = {{"x", "v"}, {"y", "v"}};
  s.resp = {{"z", "v"}};
  EXPECT_EQ(FindIntraspanCandidates(s), (std::set<std::string>{"x", "y"}));
}

TEST(Templating, IntraspanAgreesWithPairwiseOracle) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    Span s = RandomSpan(rng);
    EXPECT_EQ(FindIntraspanCandidates(s), CandidateOracle(s));
  }
}

TEST(Templating, ConfirmLoginPair) {
  std::vector<Span> spans = {LoginSpan("f7k9q2"), LoginSpan("r4m8p1")};
  EXPECT_EQ(ConfirmDynamicVariables(spans), (std::set<std::string>{"session_id"}));
}

TEST(Templating, ConfirmIdenticalSpansGiveNothing) {
  std::vector<Span> spans = {LoginSpan("f7k9q2"), LoginSpan("f7k9q2"), LoginSpan("f7k9q2")};
  EXPECT_TRUE(ConfirmDynamicVariables(spans).empty());
}

TEST(Templating, ConfirmCyclingTokenAgainstGroundTruth) {
  std::vector<Span> spans;
  const char* cycle[] = {"tok-aaaa", "tok-bbbb", "tok-cccc"};
  for (int i = 0; i < 50; ++i) {
    Span s;
    s.req = {{"T", cycle[i % 3]}, {"U", "constant"}};
    s.resp = {{"T", cycle[i % 3]}, {"U", "constant"}};
    spans.push_back(s);
  }
  EXPECT_EQ(ConfirmDynamicVariables(spans), (std::set<std::string>{"T"}));
}

TEST(Templating, ConfirmNeedsEvidence) {
  std::vector<Span> one = {LoginSpan("f7k9q2")};
  EXPECT_THROW(ConfirmDynamicVariables(one), InsufficientEvidence);
  std::vector<Span> two = {LoginSpan("a"), LoginSpan("b")};
  EXPECT_THROW(ConfirmDynamicVariables(two, 3), InsufficientEvidence);
}

TEST(Templating, ConfirmSoundnessOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Span> spans;
    for (int i = 0; i < 4; ++i) spans.push_back(RandomSpan(rng));
    std::set<std::string> expected;
    std::set<std::string> candidates;
    for (const auto& s : spans) {
      auto c = CandidateOracle(s);
      candidates.insert(c.begin(), c.end());
    }
    for (const auto& path : candidates) {
      std::set<std::string> values;
      for (const auto& s : spans) {
        if (s.req.count(path)) values.insert(s.req.at(path));
      }
      if (values.size() > 1) expected.insert(path);
    }
    EXPECT_EQ(ConfirmDynamicVariables(spans), expected);
  }
}

TEST(Templating, BuildTemplateLoginPair) {
  auto start = std::chrono::steady_clock::now();
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  TraceTemplate t = BuildTemplate(traces, {}, "login", {});
  std::set<DynamicPath> expected = {{0, PayloadSide::kRequest, "session_id"}};
  EXPECT_EQ(t.dynamic_paths, expected);
  EXPECT_EQ(t.placeholder_kinds.at(*expected.begin()), PlaceholderKind::kFreshId);
  EXPECT_EQ(t.base_trace, traces[0]);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(1));
}

TEST(Templating, RegistryOverridesWithoutEvidence) {
  Trace t = LoginTrace("t1", "f7k9q2");
  t.spans[0].req["auth.signature"] = "3f2a9c";
  ManualVariableRegistry reg;
  reg.Register({"login", PayloadSide::kRequest, "auth.signature", PlaceholderKind::kOpaqueCopy});
  std::vector<Trace> one = {t};
  TraceTemplate tmpl = BuildTemplate(one, reg, "login", {});
  DynamicPath dp{0, PayloadSide::kRequest, "auth.signature"};
  EXPECT_EQ(tmpl.dynamic_paths, (std::set<DynamicPath>{dp}));
  EXPECT_EQ(tmpl.placeholder_kinds.at(dp), PlaceholderKind::kOpaqueCopy);
}

TEST(Templating, RegistryForOneInterfaceLeavesOthersAlone) {
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  ManualVariableRegistry reg;
  reg.Register({"A", PayloadSide::kRequest, "domain_id", PlaceholderKind::kOpaqueCopy});
  TraceTemplate a = BuildTemplate(traces, reg, "A", {});
  TraceTemplate b = BuildTemplate(traces, reg, "B", {});
  TraceTemplate b_plain = BuildTemplate(traces, {}, "B", {});
  EXPECT_EQ(a.dynamic_paths.size(), 2u);
  EXPECT_EQ(b.dynamic_paths, b_plain.dynamic_paths);
}

TEST(Templating, TimestampsInsideWindowAreTimestamps) {
  std::vector<Trace> traces;
  for (int i = 0; i < 3; ++i) {
    Trace t = LoginTrace("t" + std::to_string(i), "sess" + std::to_string(i));
    std::uint64_t ts = 5'000'000 + 1000 * i;
    t.spans[0].start_us = ts;
    t.spans[0].req["ts"] = std::to_string(ts);
    t.spans[0].resp["ts"] = std::to_string(ts);
    traces.push_back(t);
  }
  TraceTemplate tmpl = BuildTemplate(traces, {}, "x", {});
  EXPECT_EQ(tmpl.placeholder_kinds.at({0, PayloadSide::kRequest, "ts"}), PlaceholderKind::kTimestamp);
  EXPECT_EQ(tmpl.placeholder_kinds.at({0, PayloadSide::kRequest, "session_id"}), PlaceholderKind::kFreshId);
}

TEST(Templating, EmptyClusterIsAnError) {
  std::vector<Trace> none;
  EXPECT_THROW(BuildTemplate(none, {}, "x", {}), ValidationError);
}

TEST(Templating, FixpointOnInstantiatedCorpus) {
  std::vector<Trace> traces;
  for (int i = 0; i < 4; ++i) {
    Trace t = LoginTrace("t" + std::to_string(i), "sess" + std::to_string(i));
    t.spans[0].start_us = 7'000'000 + 10 * i;
    t.spans[0].req["ts"] = t.spans[0].resp["ts"] = std::to_string(t.spans[0].start_us);
    t.spans[0].req["qty"] = std::to_string(i);  // dynamic but never echoed
    traces.push_back(t);
  }
  TraceTemplate first = BuildTemplate(traces, {}, "x", {});
  IdSource ids(1);
  std::vector<Trace> replayed;
  for (int i = 0; i < 4; ++i) {
    InstantiationContext ctx{7'000'500 + static_cast<std::uint64_t>(i), &ids, {}};
    Trace t = Replayed(first, Instantiate(first, ctx), "r" + std::to_string(i));
    t.spans[0].start_us = ctx.now_us;
    replayed.push_back(t);
  }
  TraceTemplate second = BuildTemplate(replayed, {}, "x", {});
  EXPECT_EQ(second.dynamic_paths, first.dynamic_paths);
  EXPECT_EQ(second.placeholder_kinds, first.placeholder_kinds);
}

TEST(Templating, InstantiateGivesFreshUniqueIds) {
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  TraceTemplate tmpl = BuildTemplate(traces, {}, "login", {});
  IdSource ids(42);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    EntryRequest req = Instantiate(tmpl, {0, &ids, {}});
    EXPECT_NE(req.payload.at("session_id"), "f7k9q2");
    EXPECT_TRUE(seen.insert(req.payload.at("session_id")).second);
    EXPECT_EQ(req.payload.at("domain_id"), "shop-eu");
    EXPECT_EQ(req.RequestLine(), "POST /api/login");
  }
}

TEST(Templating, InstantiateWithoutVariablesIsVerbatim) {
  std::vector<Trace> one = {LoginTrace("t1", "f7k9q2")};
  TraceTemplate tmpl = BuildTemplate(one, {}, "login", {});
  ASSERT_TRUE(tmpl.dynamic_paths.empty());
  EXPECT_EQ(Instantiate(tmpl, {123, nullptr, {}}), RootRequest(one[0]));
}

TEST(Templating, InstantiateIsDeterministic) {
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  TraceTemplate tmpl = BuildTemplate(traces, {}, "login", {});
  IdSource a(9), b(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(Instantiate(tmpl, {5, &a, {}}), Instantiate(tmpl, {5, &b, {}}));
}

TEST(Templating, OpaqueValuesComeFromResolver) {
  Trace t = LoginTrace("t1", "f7k9q2");
  t.spans[0].req["auth.signature"] = "stale";
  ManualVariableRegistry reg;
  reg.Register({"login", PayloadSide::kRequest, "auth.signature", PlaceholderKind::kOpaqueCopy});
  std::vector<Trace> one = {t};
  TraceTemplate tmpl = BuildTemplate(one, reg, "login", {});
  InstantiationContext ctx{0, nullptr, [](const std::string& path, const EntryRequest& req) {
                             return path + ":" + req.payload.at("domain_id");
                           }};
  EXPECT_EQ(Instantiate(tmpl, ctx).payload.at("auth.signature"), "auth.signature:shop-eu");
}

TEST(Templating, UnknownPlaceholderKindIsAnError) {
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  TraceTemplate tmpl = BuildTemplate(traces, {}, "login", {});
  tmpl.placeholder_kinds.clear();
  IdSource ids(1);
  EXPECT_THROW(Instantiate(tmpl, {0, &ids, {}}), ValidationError);
}

TEST(Templating, RegistryAddRemoveAndIdempotence) {
  ManualVariableRegistry reg;
  ManualVariableRegistry original = reg;
  ManualVariableRegistry::Entry e{"A", PayloadSide::kRequest, "auth.signature", PlaceholderKind::kOpaqueCopy};
  reg.Register(e, "sign endpoint");
  reg.Register(e, "sign endpoint");
  EXPECT_EQ(reg.size(), 1u);
  reg.Deregister("A", PayloadSide::kResponse, "auth.signature");  // different side: no-op
  EXPECT_EQ(reg.size(), 1u);
  reg.Deregister("A", PayloadSide::kRequest, "auth.signature");
  EXPECT_EQ(reg, original);
  EXPECT_THROW(reg.Register({"A", PayloadSide::kRequest, "bad..path", PlaceholderKind::kFreshId}),
               ValidationError);
}

TEST(Templating, RegistryFileRoundTripAndMerge) {
  ManualVariableRegistry a, b;
  a.Register({"A", PayloadSide::kRequest, "x", PlaceholderKind::kFreshId}, "note-b");
  b.Register({"A", PayloadSide::kRequest, "x", PlaceholderKind::kFreshId}, "note-a");
  b.Register({"B", PayloadSide::kResponse, "y.z", PlaceholderKind::kTimestamp});
  ManualVariableRegistry ab = a, ba = b;
  ab.Merge(b);
  ba.Merge(a);
  EXPECT_EQ(ab, ba);
  EXPECT_EQ(ab.entries().begin()->second, "note-a");
  std::stringstream ss;
  ab.Write(ss);
  EXPECT_EQ(ManualVariableRegistry::Parse(ss), ab);
}

TEST(Templating, TemplateRecordRoundTrip) {
  std::vector<Trace> traces = {LoginTrace("t1", "f7k9q2"), LoginTrace("t2", "r4m8p1")};
  TraceTemplate tmpl = BuildTemplate(traces, {}, "login", {});
  EXPECT_EQ(TemplateFromJsonLine(TemplateToJsonLine(tmpl), 1), tmpl);
}
