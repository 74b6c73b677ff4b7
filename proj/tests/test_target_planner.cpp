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

#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "resilitest/common.hpp"
#include "resilitest/target_planner.hpp"
#include "oracles.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

const Endpoint kDbQuery = Ep(Component::kDatabase, "jdbc", "query");
const Endpoint kDbInsert = Ep(Component::kDatabase, "jdbc", "insert");
const Endpoint kCacheSet = Ep(Component::kCache, "redis", "set");
const Endpoint kCacheGet = Ep(Component::kCache, "redis", "get");
const Endpoint kMqSend = Ep(Component::kMQ, "kafka", "send");
const Endpoint kRpcCall = Ep(Component::kRPC, "grpc", "call");

FaultCatalog OneFaultPerComponent() {
  std::istringstream in(
      "c platform_exception Cache/*/* throw C\n"
      "d platform_exception Database/*/* throw D\n"
      "d2 comm_latency Database/*/* delay auto\n"
      "m platform_exception MQ/*/* throw M\n"
      "r comm_protocol_error RPC/*/* throw R\n");
  return FaultCatalog::Parse(in);
}

}  // namespace

TEST(TargetPlanner, ExtractEndpointsSkipsRoot) {
  Trace t = MakeTrace("t");
  AddChild(t, "a", kDbQuery);
  AddChild(t, "a", kCacheGet);
  auto eps = ExtractEndpoints(t);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0], std::make_pair(std::size_t{1}, kDbQuery));
  EXPECT_EQ(eps[1], std::make_pair(std::size_t{2}, kCacheGet));
}

TEST(TargetPlanner, LastInvocationPerEndpoint) {
  Trace t = MakeTrace("t");
  AddChild(t, "a", kDbQuery);
  AddChild(t, "a", kCacheGet);
  AddChild(t, "a", kDbQuery);
  auto targets = LastInvocationTargets(t);
  std::map<Endpoint, std::size_t> by_ep;
  for (const auto& x : targets) by_ep[x.endpoint] = x.span_position;
  EXPECT_EQ(by_ep.size(), 2u);
  EXPECT_EQ(by_ep[kDbQuery], 3u);
  EXPECT_EQ(by_ep[kCacheGet], 2u);
}

TEST(TargetPlanner, ProducerConsumerPrunesConsumer) {
  Trace t = MakeTrace("t");
  AddChild(t, "orders", kRpcCall, {}, {{"order_id", "ORD-55821"}});
  AddChild(t, "orders", kDbInsert, {{"order_id", "ORD-55821"}});
  auto edges = DetectProducerConsumer(t);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0].first, 1u);
  EXPECT_EQ(edges[0].second, 2u);
  EXPECT_EQ(edges[0].shared_tokens, std::set<std::string>{"ORD-55821"});

  ServiceIndex index = BuildServiceIndex(std::vector<Trace>{t});
  auto survivors = SurvivingTargets(t, index, PlanConfig{});
  ASSERT_EQ(survivors.size(), 1u);
  EXPECT_EQ(survivors[0].span_position, 1u);
  EXPECT_EQ(survivors[0].rationale, Rationale::kProducer);
}

TEST(TargetPlanner, ShortTokensAreIgnored) {
  Trace t = MakeTrace("t");
  AddChild(t, "orders", kRpcCall, {}, {{"n", "abc"}});
  AddChild(t, "orders", kDbInsert, {{"n", "abc"}});
  EXPECT_TRUE(DetectProducerConsumer(t).empty());
}

TEST(TargetPlanner, ChainYieldsTwoEdges) {
  Trace t = MakeTrace("t");
  AddChild(t, "s", kRpcCall, {}, {{"a", "TOKEN-A"}});
  AddChild(t, "s", kDbQuery, {{"a", "TOKEN-A"}}, {{"b", "TOKEN-B"}});
  AddChild(t, "s", kCacheSet, {{"b", "TOKEN-B"}});
  auto edges = DetectProducerConsumer(t);
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(std::make_pair(edges[0].first, edges[0].second), std::make_pair(std::size_t{1}, std::size_t{2}));
  EXPECT_EQ(std::make_pair(edges[1].first, edges[1].second), std::make_pair(std::size_t{2}, std::size_t{3}));
}

TEST(TargetPlanner, DifferentParentsAreNotPaired) {
  Trace t = MakeTrace("t");
  AddChild(t, "s", kRpcCall, {}, {{"a", "TOKEN-A"}});
  t.spans.push_back(MakeSpan("x", std::string("s1"), "s", kDbInsert, 12, 2, {{"a", "TOKEN-A"}}));
  EXPECT_TRUE(DetectProducerConsumer(t).empty());
}

TEST(TargetPlanner, DualWriteKeepsSecondary) {
  Trace t = MakeTrace("t");
  AddChild(t, "users", kDbInsert, {{"user", "USER-778"}});
  AddChild(t, "users", kCacheSet, {{"user", "USER-778"}});
  auto edges = DetectDualWrite(t);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0].secondary, 2u);

  auto survivors = SurvivingTargets(t, BuildServiceIndex(std::vector<Trace>{t}), PlanConfig{});
  ASSERT_EQ(survivors.size(), 1u);
  EXPECT_EQ(survivors[0].span_position, 2u);
  EXPECT_EQ(survivors[0].rationale, Rationale::kDualWriteSecondary);
}

TEST(TargetPlanner, DualWriteNeedsSameServiceAndDifferentComponents) {
  Trace t = MakeTrace("t");
  AddChild(t, "users", kDbInsert, {{"user", "USER-778"}});
  AddChild(t, "other", kCacheSet, {{"user", "USER-778"}});
  EXPECT_TRUE(DetectDualWrite(t).empty());
  Trace u = MakeTrace("u");
  AddChild(u, "users", kDbInsert, {{"user", "USER-778"}});
  AddChild(u, "users", Ep(Component::kDatabase, "jdbc", "update"), {{"user", "USER-778"}});
  EXPECT_TRUE(DetectDualWrite(u).empty());
}

TEST(TargetPlanner, AsyncPublishIsSecondary) {
  Trace t = MakeTrace("t");
  AddChild(t, "orders", kMqSend, {{"id", "ORD-991"}});
  AddChild(t, "orders", kDbInsert, {{"id", "ORD-991"}});
  AsyncLookup async = [](const Span& s) { return s.endpoint.component == Component::kMQ; };
  auto edges = DetectDualWrite(t, async);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0].secondary, 1u);
  // Without timing information the later write is secondary.
  EXPECT_EQ(DetectDualWrite(t)[0].secondary, 2u);
}

TEST(TargetPlanner, SampleServicesIsDeterministic) {
  ServiceIndex index;
  for (int i = 0; i < 10; ++i) index[kDbQuery].insert("svc" + std::to_string(i));
  index[kCacheGet] = {"a", "b"};
  auto a = SampleServices(index, kDbQuery, 3, 42);
  EXPECT_EQ(a, SampleServices(index, kDbQuery, 3, 42));
  EXPECT_EQ(a.size(), 3u);
  for (const auto& s : a) EXPECT_TRUE(index[kDbQuery].count(s));
  EXPECT_EQ(SampleServices(index, kCacheGet, 3, 42), (std::set<std::string>{"a", "b"}));
  EXPECT_TRUE(SampleServices(index, kMqSend, 3, 42).empty());
  EXPECT_THROW(SampleServices(index, kDbQuery, 0, 42), ValidationError);
  std::set<std::set<std::string>> distinct;
  for (std::uint64_t seed = 0; seed < 20; ++seed) distinct.insert(SampleServices(index, kDbQuery, 3, seed));
  EXPECT_GT(distinct.size(), 1u);
}

TEST(TargetPlanner, MatchesBruteForceOracle) {
  Rng rng(606);
  auto catalog = OneFaultPerComponent();
  AsyncLookup async = [](const Span& s) { return s.endpoint.component == Component::kMQ; };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Trace> traces;
    std::size_t n = 1 + rng.Below(4);
    for (std::size_t i = 0; i < n; ++i) traces.push_back(RandomPlannerTrace(rng, "t" + std::to_string(trial) + "_" + std::to_string(i)));
    Corpus corpus;
    corpus.traces = traces;
    std::vector<SelectedTrace> selected;
    for (const auto& t : corpus.traces) selected.push_back({"if_" + t.trace_id, &t});
    PlanConfig config;
    config.n_services = 1 + rng.Below(2);
    config.seed = trial;
    config.is_async = trial % 2 ? async : AsyncLookup{};

    auto cases = PlanTargets(selected, corpus, catalog, config);
    std::vector<PlannedTriple> got;
    for (const auto& c : cases) {
      got.emplace_back(c.target.trace_id, c.target.span_position, c.fault_id);
      EXPECT_EQ(c.case_id, CaseIdFor(c.target.trace_id, c.target.span_position, c.fault_id));
      EXPECT_EQ(c.interface_id, "if_" + c.target.trace_id);
    }
    EXPECT_EQ(got, PruningOracle(traces, catalog, config.n_services, config.seed, config.is_async))
        << "trial " << trial;
  }
}

TEST(TargetPlanner, EmptySelectionIsRejected) {
  Corpus corpus;
  EXPECT_THROW(PlanTargets(std::vector<SelectedTrace>{}, corpus, OneFaultPerComponent(), PlanConfig{}),
               ValidationError);
}

TEST(TargetPlanner, PlanFileRoundTrip) {
  Rng rng(1);
  Corpus corpus;
  for (int i = 0; i < 5; ++i) corpus.traces.push_back(RandomPlannerTrace(rng, "rt" + std::to_string(i)));
  std::vector<SelectedTrace> selected;
  for (const auto& t : corpus.traces) selected.push_back({"iface", &t});
  auto cases = PlanTargets(selected, corpus, FaultCatalog::BuiltIn(), PlanConfig{});
  ASSERT_FALSE(cases.empty());
  std::stringstream io;
  WritePlan(io, cases);
  EXPECT_EQ(ReadPlan(io), cases);
  EXPECT_THROW(TestCaseFromLine("a b c", 3), ParseError);
  EXPECT_THROW(TestCaseFromLine("a t x Database/jdbc/query s f plain i", 3), ParseError);
}
