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

// Groups traces into entry interfaces by mining request-line templates with a
// fixed-depth parse tree (Drain).

#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resilitest/trace.hpp"

namespace resilitest {

struct RequestLine {
  std::string method;
  std::vector<std::string> tokens;
  bool operator==(const RequestLine&) const = default;
};

/// "POST /api/login/alice" -> (POST, [api, login, alice]). Throws ParseError.
RequestLine ParseRequestLine(std::string_view line);

struct DrainParams {
  std::size_t tree_depth = 4;
  double similarity_threshold = 0.5;
  std::size_t max_children = 100;
};

/// std::nullopt marks a wildcard position.
using TemplateToken = std::optional<std::string>;

struct InterfaceCluster {
  std::string interface_id;
  std::string http_method;
  std::vector<TemplateToken> template_tokens;
  std::vector<std::string> member_trace_ids;

  /// "POST /api/login/<*>"
  std::string TemplateString() const;
  std::size_t WildcardCount() const;
};

std::string InterfaceIdFor(std::string_view method, const std::vector<TemplateToken>& tokens);

class DrainTree {
 public:
  explicit DrainTree(DrainParams params = {});
  ~DrainTree();
  DrainTree(DrainTree&&) noexcept;
  DrainTree& operator=(DrainTree&&) noexcept;

  /// Folds one line into the tree; returns the index of its cluster.
  std::size_t Add(const RequestLine& line, const std::string& trace_id);
  /// Clusters in creation order with ids refreshed from their final templates.
  std::vector<InterfaceCluster> Clusters() const;

 private:
  struct Node;
  DrainParams params_;
  std::map<std::pair<std::string, std::size_t>, std::unique_ptr<Node>> roots_;
  std::vector<InterfaceCluster> clusters_;
};

std::vector<InterfaceCluster> ClusterInterfaces(const Corpus& corpus, const DrainParams& params = {});

/// `<interface_id> <template> <member count>` per line.
void WriteClusterReport(std::ostream& out, const std::vector<InterfaceCluster>& clusters);

}  // namespace resilitest
