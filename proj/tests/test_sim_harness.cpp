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

#include <set>
#include <sstream>

#include "resilitest/common.hpp"
#include "resilitest/simulator.hpp"
#include "resilitest/topology.hpp"
#include "test_support.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

constexpr const char* kSmall = R"(topology small seed=1
component Database jdbc
component Cache redis
component MQ kafka
service front workers=4
  interface POST /front/order/{id}
    step Database jdbc insert res=orders timeout=1s
    step Cache redis set res=orders_c
  end
  interface POST /front/notify/{id}
    step Database jdbc query res=orders
    step MQ kafka send res=events async on_error=ignore bug=fire_and_forget
  end
  interface GET /front/remote/{id}
    step HTTP http call to=back:GET:/back/item/{id} timeout=none bug=missing_timeout
  end
end
service back workers=4
  interface GET /back/item/{id}
    step Database jdbc query res=items
  end
end
)";

TopologySpec Small() {
  std::istringstream in(kSmall);
  return ParseTopology(in);
}

FaultSpec Fault(const std::string& line) { return ParseFaultLine(line); }

EntryResponse Call(System& sys, const std::string& method, const std::string& uri,
                   std::uint64_t wait_us = 20'000'000) {
  std::size_t ticket = sys.Submit(EntryRequest{method, uri, {}});
  sys.AdvanceBy(wait_us);
  if (!sys.Done(ticket)) return EntryResponse{-1, {}};
  return sys.Response(ticket);
}

}  // namespace

TEST(SimHarness, ReferenceTopologyLoads) {
  auto topo = LoadTopology(AssetPath("reference_topology.txt"));
  EXPECT_GE(topo.services.size(), 8u);
  EXPECT_GE(topo.InterfaceCount(), 25u);
  EXPECT_EQ(topo.Bugs().size(), 10u);
  std::set<Component> used;
  std::set<BugFlag> flags;
  for (const auto& s : topo.services) {
    for (const auto& i : s.interfaces) {
      for (const auto& st : i.workflow) used.insert(st.endpoint.component);
    }
    for (auto f : s.BugFlags()) flags.insert(f);
  }
  EXPECT_EQ(used.size(), 5u);
  EXPECT_EQ(flags.size(), 5u);
  std::ostringstream text;
  WriteTopology(text, topo);
  std::istringstream back(text.str());
  EXPECT_EQ(ParseTopology(back).Digest(), topo.Digest());
}

TEST(SimHarness, TopologyErrorsNameTheLine) {
  std::string undeclared = kSmall;
  undeclared.replace(undeclared.find("to=back:"), 8, "to=ghost:");
  std::istringstream a(undeclared);
  try {
    ParseTopology(a);
    FAIL() << "accepted a call to an undeclared service";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 15"), std::string::npos) << e.what();
  }
  std::string dup = std::string(kSmall) + "service back\nend\n";
  std::istringstream b(dup);
  EXPECT_THROW(ParseTopology(b), ValidationError);
  std::istringstream c("topology x\nservice s\n  interface GET /a\n    step Teapot x y res=r\n  end\nend\n");
  EXPECT_THROW(ParseTopology(c), ParseError);
}

TEST(SimHarness, SameSeedSameTraces) {
  auto topo = Small();
  std::vector<WorkloadEntry> workload;
  for (int i = 0; i < 30; ++i) {
    workload.push_back({static_cast<std::uint64_t>(i) * 50'000, i % 2 ? "POST" : "GET",
                        i % 2 ? "/front/order/" + std::to_string(i) : "/back/item/" + std::to_string(i), {}});
  }
  Corpus a = SimulateRecord(topo, workload, 9);
  Corpus b = SimulateRecord(topo, workload, 9);
  EXPECT_EQ(a.traces, b.traces);
  ASSERT_EQ(a.traces.size(), 30u);
  for (const auto& t : a.traces) EXPECT_TRUE(ValidateTrace(t).empty()) << t.trace_id;
}

TEST(SimHarness, HealthySpanCountIsWorkflowPlusRoot) {
  auto topo = Small();
  System sys(topo, 1, SystemOptions{true});
  std::size_t ticket = sys.Submit(EntryRequest{"POST", "/front/order/7", {}});
  sys.AdvanceBy(5'000'000);
  ASSERT_TRUE(sys.Done(ticket));
  EXPECT_TRUE(sys.Response(ticket).ok());
  Trace t = sys.RecordedTrace(ticket, "x");
  EXPECT_EQ(t.spans.size(), 3u);
  EXPECT_EQ(t.spans[1].endpoint, Ep(Component::kDatabase, "jdbc", "insert"));
  EXPECT_EQ(t.spans[2].endpoint, Ep(Component::kCache, "redis", "set"));
}

TEST(SimHarness, MissingTimeoutHangsTheCaller) {
  auto topo = Small();
  System sys(topo, 1);
  sys.Arm("front", Ep(Component::kHTTP, "http", "call"),
          Fault("hang comm_protocol_error HTTP/*/* throw java.net.SocketTimeoutException"));
  auto resp = Call(sys, "GET", "/front/remote/1");
  EXPECT_EQ(resp.status, 504);  // gateway gives up; the worker stays stuck
  MetricsWindow w{0, sys.now_us()};
  auto bugs = sys.TriggeredBugs(w);
  ASSERT_EQ(bugs.size(), 1u);
  EXPECT_NE(bugs[0].find("missing_timeout"), std::string::npos);
  // Once every worker is stuck, even healthy requests to the service fail.
  for (int i = 0; i < 4; ++i) Call(sys, "GET", "/front/remote/" + std::to_string(i + 2));
  sys.DisarmAll();
  EXPECT_FALSE(Call(sys, "POST", "/front/order/1").ok());
}

TEST(SimHarness, FireAndForgetLooksHealthyAtTheEntry) {
  auto topo = Small();
  System sys(topo, 1, SystemOptions{true});
  sys.Arm("front", Ep(Component::kMQ, "kafka", "send"),
          Fault("mq-timeout platform_exception MQ/*/* throw TimeoutException"));
  std::size_t ticket = sys.Submit(EntryRequest{"POST", "/front/notify/3", {}});
  sys.AdvanceBy(5'000'000);
  ASSERT_TRUE(sys.Done(ticket));
  EXPECT_TRUE(sys.Response(ticket).ok());
  Trace t = sys.RecordedTrace(ticket, "x");
  bool mq_failed = false;
  for (const auto& s : t.spans) {
    if (s.endpoint.component == Component::kMQ) mq_failed = !s.status.ok;
  }
  EXPECT_TRUE(mq_failed);
  auto m = sys.CollectMetrics({0, sys.now_us()});
  EXPECT_EQ(m.entry.success_rate, 1.0);
  EXPECT_FALSE(m.downstream_ok());
  EXPECT_EQ(sys.Delivered("events"), 0u);
}

TEST(SimHarness, DelayBeyondTimeoutFails) {
  auto topo = Small();
  System sys(topo, 1);
  sys.Arm("front", Ep(Component::kDatabase, "jdbc", "insert"), Fault("slow comm_latency Database/*/* delay 5s"));
  EXPECT_FALSE(Call(sys, "POST", "/front/order/1").ok());
  EXPECT_EQ(sys.Hits("front", Ep(Component::kDatabase, "jdbc", "insert")), 1u);
}

TEST(SimHarness, ArmAndDisarm) {
  auto topo = Small();
  System sys(topo, 1);
  Endpoint insert = Ep(Component::kDatabase, "jdbc", "insert");
  EXPECT_TRUE(Call(sys, "POST", "/front/order/1").ok());
  sys.Arm("front", insert, Fault("db platform_exception Database/*/* throw SQLTimeoutException"));
  EXPECT_FALSE(Call(sys, "POST", "/front/order/2").ok());
  sys.Disarm("front", insert);
  EXPECT_TRUE(Call(sys, "POST", "/front/order/3").ok());
  EXPECT_EQ(sys.Hits("front", insert), 1u);
  EXPECT_THROW(sys.Arm("front", Ep(Component::kDatabase, "jdbc", "delete"),
                       Fault("db platform_exception Database/*/* throw X")),
               ValidationError);
  EXPECT_THROW(sys.Arm("front", insert, Fault("c platform_exception Cache/*/* throw X")), ValidationError);
}

TEST(SimHarness, FaultsAreScopedToTheService) {
  auto topo = Small();
  System sys(topo, 1);
  Endpoint query = Ep(Component::kDatabase, "jdbc", "query");
  sys.Arm("front", query, Fault("db platform_exception Database/*/* throw SQLTimeoutException"));
  EXPECT_TRUE(Call(sys, "GET", "/back/item/1").ok());
  EXPECT_FALSE(Call(sys, "POST", "/front/notify/1").ok());
  EXPECT_EQ(sys.Hits("back", query), 0u);
}

TEST(SimHarness, MetricsSuccessRate) {
  auto topo = Small();
  System sys(topo, 1);
  for (int i = 0; i < 7; ++i) sys.Submit(EntryRequest{"POST", "/front/order/" + std::to_string(i), {}});
  for (int i = 0; i < 3; ++i) sys.Submit(EntryRequest{"GET", "/nowhere/" + std::to_string(i), {}});
  sys.AdvanceBy(20'000'000);
  auto m = sys.CollectMetrics({0, sys.now_us()});
  EXPECT_EQ(m.entry.requests, 10u);
  EXPECT_EQ(m.entry.successes, 7u);
  ASSERT_TRUE(m.entry.success_rate);
  EXPECT_DOUBLE_EQ(*m.entry.success_rate, 0.7);
}

TEST(SimHarness, EmptyWindowHasNoRate) {
  auto topo = Small();
  System sys(topo, 1);
  sys.AdvanceBy(1'000'000);
  auto m = sys.CollectMetrics({0, sys.now_us()});
  EXPECT_EQ(m.entry.requests, 0u);
  EXPECT_FALSE(m.entry.success_rate.has_value());
  EXPECT_THROW(sys.CollectMetrics({0, sys.now_us() + 1}), ValidationError);
}

TEST(SimHarness, RequestsAreConserved) {
  auto topo = Small();
  Rng rng(12);
  System sys(topo, 4);
  const char* uris[] = {"/front/order/", "/front/notify/", "/back/item/"};
  const char* methods[] = {"POST", "POST", "GET"};
  std::size_t submitted = 0;
  for (int i = 0; i < 300; ++i) {
    std::size_t k = rng.Below(3);
    sys.Submit(EntryRequest{methods[k], uris[k] + std::to_string(i), {}});
    ++submitted;
    sys.AdvanceBy(rng.Below(20'000));
  }
  sys.AdvanceBy(kEntryTimeoutUs + 1);
  auto m = sys.CollectMetrics({0, sys.now_us()});
  EXPECT_EQ(m.entry.requests, submitted);
  EXPECT_EQ(m.entry.completed, submitted);
  EXPECT_EQ(m.entry.successes, submitted);
  for (const auto& [key, c] : m.endpoints) EXPECT_LE(c.failures, c.invocations);
}

TEST(SimHarness, UnknownRouteIs404) {
  auto topo = Small();
  System sys(topo, 1);
  EXPECT_EQ(Call(sys, "GET", "/missing").status, 404);
  EXPECT_EQ(Call(sys, "DELETE", "/front/order/1").status, 404);
}
