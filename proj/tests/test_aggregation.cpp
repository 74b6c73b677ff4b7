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

#include "resilitest/aggregation.hpp"
#include "resilitest/common.hpp"
#include "test_support.hpp"

using namespace resilitest;
using namespace rt_test;

namespace {

Corpus CorpusOf(const std::vector<std::pair<std::string, std::string>>& lines) {
  Corpus c;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    c.traces.push_back(MakeTrace("t" + std::to_string(i), lines[i].first, lines[i].second));
  }
  return c;
}

struct GenTemplate {
  std::string method;
  std::vector<std::string> tokens;  // "{}" marks a parameter
};

// 20 templates whose literal parts differ in at least half their tokens.
std::vector<GenTemplate> GeneratorTemplates() {
  std::vector<GenTemplate> out;
  const char* nouns[] = {"orders", "users", "carts", "items", "rates"};
  for (int i = 0; i < 20; ++i) {
    GenTemplate g;
    g.method = i % 2 ? "GET" : "POST";
    std::string noun = nouns[i % 5];
    std::string verb = "op" + std::string(1, static_cast<char>('a' + i));
    switch (i % 4) {
      case 0: g.tokens = {noun, verb, "{}"}; break;
      case 1: g.tokens = {noun, "{}", verb}; break;
      case 2: g.tokens = {noun, verb, "{}", "detail" + std::string(1, static_cast<char>('a' + i))}; break;
      default: g.tokens = {noun, verb}; break;
    }
    out.push_back(g);
  }
  return out;
}

std::string Param(Rng& rng) {
  // Parameters carry digits, like real ids.
  return (rng.Below(2) ? "u" : "") + std::to_string(1000 + rng.Below(900000));
}

}  // namespace

TEST(Aggregation, ParseRequestLineExamples) {
  EXPECT_EQ(ParseRequestLine("POST /api/login/alice"), (RequestLine{"POST", {"api", "login", "alice"}}));
  EXPECT_EQ(ParseRequestLine("GET /"), (RequestLine{"GET", {}}));
  EXPECT_EQ(ParseRequestLine("PUT /a//b"), (RequestLine{"PUT", {"a", "", "b"}}));
  EXPECT_THROW(ParseRequestLine("GET"), ParseError);
  EXPECT_THROW(ParseRequestLine(" /x"), ParseError);
  EXPECT_THROW(ParseRequestLine(""), ParseError);
}

TEST(Aggregation, LoginExampleMergesIntoOneTemplate) {
  auto clusters = ClusterInterfaces(CorpusOf({{"POST", "/api/login/alice"}, {"POST", "/api/login/bob"}}));
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].TemplateString(), "POST /api/login/<*>");
  EXPECT_EQ(clusters[0].member_trace_ids.size(), 2u);
}

TEST(Aggregation, IdenticalLinesHaveNoWildcards) {
  std::vector<std::pair<std::string, std::string>> lines(1000, {"GET", "/health"});
  auto clusters = ClusterInterfaces(CorpusOf(lines));
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0].WildcardCount(), 0u);
  EXPECT_EQ(clusters[0].member_trace_ids.size(), 1000u);
}

TEST(Aggregation, RecoversGeneratorTemplates) {
  auto gen = GeneratorTemplates();
  Rng rng(2024);
  std::vector<std::pair<std::string, std::string>> lines;
  std::map<std::string, std::size_t> truth;  // trace id -> generator template
  for (int i = 0; i < 2000; ++i) {
    std::size_t g = rng.Below(gen.size());
    std::string uri;
    for (const auto& tok : gen[g].tokens) uri += "/" + (tok == "{}" ? Param(rng) : tok);
    truth["t" + std::to_string(lines.size())] = g;
    lines.emplace_back(gen[g].method, uri);
  }
  Corpus corpus = CorpusOf(lines);
  auto clusters = ClusterInterfaces(corpus);
  ASSERT_EQ(clusters.size(), gen.size());

  std::set<std::string> seen;
  std::set<std::size_t> recovered;
  for (const auto& c : clusters) {
    ASSERT_FALSE(c.member_trace_ids.empty());
    std::size_t g = truth.at(c.member_trace_ids.front());
    for (const auto& id : c.member_trace_ids) {
      EXPECT_TRUE(seen.insert(id).second) << "trace in two clusters";
      EXPECT_EQ(truth.at(id), g) << "cluster mixes templates";
    }
    recovered.insert(g);
    ASSERT_EQ(c.template_tokens.size(), gen[g].tokens.size());
    for (std::size_t p = 0; p < c.template_tokens.size(); ++p) {
      if (gen[g].tokens[p] == "{}") {
        EXPECT_FALSE(c.template_tokens[p].has_value());
      } else {
        EXPECT_EQ(c.template_tokens[p], gen[g].tokens[p]);  // wildcards only at parameters
      }
    }
    EXPECT_EQ(c.interface_id, InterfaceIdFor(c.http_method, c.template_tokens));
  }
  EXPECT_EQ(seen.size(), corpus.traces.size());
  EXPECT_EQ(recovered.size(), gen.size());
}

TEST(Aggregation, LiteralTokensAgreeAcrossMembers) {
  Rng rng(5);
  auto gen = GeneratorTemplates();
  std::vector<std::pair<std::string, std::string>> lines;
  for (int i = 0; i < 300; ++i) {
    const auto& g = gen[rng.Below(gen.size())];
    std::string uri;
    for (const auto& tok : g.tokens) uri += "/" + (tok == "{}" ? Param(rng) : tok);
    lines.emplace_back(g.method, uri);
  }
  Corpus corpus = CorpusOf(lines);
  std::map<std::string, RequestLine> by_id;
  for (const auto& t : corpus.traces) by_id[t.trace_id] = ParseRequestLine(t.spans[0].op);
  for (const auto& c : ClusterInterfaces(corpus)) {
    for (const auto& id : c.member_trace_ids) {
      const auto& rl = by_id.at(id);
      EXPECT_EQ(rl.method, c.http_method);
      ASSERT_EQ(rl.tokens.size(), c.template_tokens.size());
      for (std::size_t p = 0; p < rl.tokens.size(); ++p) {
        if (c.template_tokens[p]) {
          EXPECT_EQ(rl.tokens[p], *c.template_tokens[p]);
        }
      }
    }
  }
}

TEST(Aggregation, TokenCountsNeverShareACluster) {
  auto clusters = ClusterInterfaces(CorpusOf({{"GET", "/a/b"}, {"GET", "/a/b/c"}, {"GET", "/a"}}));
  EXPECT_EQ(clusters.size(), 3u);
}

TEST(Aggregation, ReclusteringIsStable) {
  Rng rng(17);
  auto gen = GeneratorTemplates();
  std::vector<std::pair<std::string, std::string>> lines;
  for (int i = 0; i < 400; ++i) {
    const auto& g = gen[rng.Below(gen.size())];
    std::string uri;
    for (const auto& tok : g.tokens) uri += "/" + (tok == "{}" ? Param(rng) : tok);
    lines.emplace_back(g.method, uri);
  }
  auto first = ClusterInterfaces(CorpusOf(lines));
  // Re-render every line through its learned template (fresh parameter values).
  std::vector<std::pair<std::string, std::string>> again;
  for (const auto& c : first) {
    for (std::size_t m = 0; m < c.member_trace_ids.size(); ++m) {
      std::string uri;
      for (const auto& tok : c.template_tokens) uri += "/" + (tok ? *tok : Param(rng));
      again.emplace_back(c.http_method, uri);
    }
  }
  auto second = ClusterInterfaces(CorpusOf(again));
  std::set<std::string> a, b;
  for (const auto& c : first) a.insert(c.TemplateString());
  for (const auto& c : second) b.insert(c.TemplateString());
  EXPECT_EQ(a, b);
}

TEST(Aggregation, ClusterReportFormat) {
  auto clusters = ClusterInterfaces(CorpusOf({{"POST", "/api/login/alice"}, {"POST", "/api/login/bob"}}));
  std::ostringstream out;
  WriteClusterReport(out, clusters);
  EXPECT_EQ(out.str(), clusters[0].interface_id + " POST /api/login/<*> 2\n");
}
