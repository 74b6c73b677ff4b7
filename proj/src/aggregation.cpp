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

#include "resilitest/aggregation.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>
#include <set>

#include "resilitest/common.hpp"

namespace resilitest {

namespace {

constexpr std::string_view kWildcard = "<*>";

bool HasDigit(std::string_view token) {
  return std::any_of(token.begin(), token.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

RequestLine ParseRequestLine(std::string_view line) {
  auto sp = line.find(' ');
  if (line.empty() || sp == std::string_view::npos || sp == 0) {
    throw ParseError("malformed request line '" + std::string(line) + "': missing method or path",
                     0);
  }
  std::string_view path = line.substr(sp + 1);
  if (path.empty() || path.front() != '/' || path.find(' ') != std::string_view::npos) {
    throw ParseError("malformed request line '" + std::string(line) + "': bad path", 0);
  }
  RequestLine out{std::string(line.substr(0, sp)), {}};
  auto q = path.find('?');
  if (q != std::string_view::npos) path = path.substr(0, q);
  path.remove_prefix(1);
  if (!path.empty()) out.tokens = Split(path, '/');
  return out;
}

std::string InterfaceCluster::TemplateString() const {
  std::string s = http_method + " /";
  for (std::size_t i = 0; i < template_tokens.size(); ++i) {
    if (i) s += '/';
    s += template_tokens[i] ? *template_tokens[i] : std::string(kWildcard);
  }
  return s;
}

std::size_t InterfaceCluster::WildcardCount() const {
  return static_cast<std::size_t>(
      std::count(template_tokens.begin(), template_tokens.end(), std::nullopt));
}

std::string InterfaceIdFor(std::string_view method, const std::vector<TemplateToken>& tokens) {
  std::string key(method);
  for (const auto& t : tokens) {
    key += '\x1f';
    key += t ? *t : std::string(kWildcard);
  }
  return HexDigest(key);
}

struct DrainTree::Node {
  std::map<std::string, std::unique_ptr<Node>> children;
  std::vector<std::size_t> groups;  // cluster indices at a leaf
};

DrainTree::DrainTree(DrainParams params) : params_(params) {
  if (params_.tree_depth < 3) params_.tree_depth = 3;
  if (params_.max_children < 1) params_.max_children = 1;
}
DrainTree::~DrainTree() = default;
DrainTree::DrainTree(DrainTree&&) noexcept = default;
DrainTree& DrainTree::operator=(DrainTree&&) noexcept = default;

std::size_t DrainTree::Add(const RequestLine& line, const std::string& trace_id) {
  auto& root = roots_[{line.method, line.tokens.size()}];
  if (!root) root = std::make_unique<Node>();
  Node* node = root.get();

  // Internal layers route on the leading tokens.
  const std::size_t prefix_layers = std::min(params_.tree_depth - 2, line.tokens.size());
  for (std::size_t i = 0; i < prefix_layers; ++i) {
    const std::string& tok = line.tokens[i];
    std::string key = HasDigit(tok) ? std::string(kWildcard) : tok;
    auto it = node->children.find(key);
    if (it == node->children.end()) {
      if (key != kWildcard && node->children.size() >= params_.max_children) {
        key = std::string(kWildcard);
        it = node->children.find(key);
      }
      if (it == node->children.end()) {
        it = node->children.emplace(key, std::make_unique<Node>()).first;
      }
    }
    node = it->second.get();
  }

  // Best group at the leaf: highest similarity, then most wildcards.
  std::optional<std::size_t> best;
  double best_sim = -1.0;
  std::size_t best_params = 0;
  for (std::size_t g : node->groups) {
    const auto& tmpl = clusters_[g].template_tokens;
    std::size_t same = 0;
    std::size_t params = 0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      if (!tmpl[i]) {
        ++params;
      } else if (*tmpl[i] == line.tokens[i]) {
        ++same;
      }
    }
    double sim = tmpl.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(tmpl.size());
    if (sim > best_sim || (sim == best_sim && params > best_params)) {
      best = g;
      best_sim = sim;
      best_params = params;
    }
  }

  if (best && best_sim >= params_.similarity_threshold) {
    auto& cluster = clusters_[*best];
    for (std::size_t i = 0; i < cluster.template_tokens.size(); ++i) {
      if (cluster.template_tokens[i] && *cluster.template_tokens[i] != line.tokens[i]) {
        cluster.template_tokens[i] = std::nullopt;
      }
    }
    cluster.member_trace_ids.push_back(trace_id);
    return *best;
  }

  InterfaceCluster cluster;
  cluster.http_method = line.method;
  cluster.template_tokens.assign(line.tokens.begin(), line.tokens.end());
  cluster.member_trace_ids.push_back(trace_id);
  clusters_.push_back(std::move(cluster));
  node->groups.push_back(clusters_.size() - 1);
  return clusters_.size() - 1;
}

std::vector<InterfaceCluster> DrainTree::Clusters() const {
  std::vector<InterfaceCluster> out = clusters_;
  std::set<std::string> used;
  for (auto& c : out) {
    std::string id = InterfaceIdFor(c.http_method, c.template_tokens);
    // Distinct leaves can converge on one template; keep ids unique.
    for (int n = 1; !used.insert(id).second; ++n) id = HexDigest(id + "#" + std::to_string(n));
    c.interface_id = std::move(id);
  }
  return out;
}

std::vector<InterfaceCluster> ClusterInterfaces(const Corpus& corpus, const DrainParams& params) {
  DrainTree tree(params);
  for (const Trace& t : corpus.traces) {
    tree.Add(ParseRequestLine(t.RootSpan().op), t.trace_id);
  }
  return tree.Clusters();
}

void WriteClusterReport(std::ostream& out, const std::vector<InterfaceCluster>& clusters) {
  for (const auto& c : clusters) {
    out << c.interface_id << ' ' << c.TemplateString() << ' ' << c.member_trace_ids.size() << '\n';
  }
}

}  // namespace resilitest
