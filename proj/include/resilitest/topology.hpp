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


// Declarative description of the simulated system under test.
//
//   topology <name> seed=<u64>
//   component <Database|Cache|MQ> <framework>
//   service <name> [workers=<n>]
//     interface <METHOD> <uri-template> [fields=session,ts,idem,sign] [static=k:v,...]
//       step <Component> <framework> <method> [attributes]
//     end
//   end
//
// Step attributes: to=<service>:<METHOD>:<uri> (RPC/HTTP), res=<name>
// (Database table, Cache keyspace, MQ topic), timeout=<duration>|none,
// retries=<n>, on_error=propagate|catch_and_degrade|ignore, async,
// bug=<flag>, produces=<token>, uses=<token>, mirror=<table>.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "resilitest/trace.hpp"

namespace resilitest {

enum class OnError { kPropagate, kCatchAndDegrade, kIgnore };
enum class BugFlag { kMissingTimeout, kFireAndForget, kNoRollback, kNoRetry, kSwallowThenSucceed };

std::string_view OnErrorName(OnError e);
std::string_view BugFlagName(BugFlag b);
std::optional<BugFlag> ParseBugFlag(std::string_view text);

std::uint64_t DefaultTimeoutUs(Component c);

struct Step {
  Endpoint endpoint;
  std::string target_service;  // RPC/HTTP
  std::string target_method;
  std::string target_uri;
  std::string resource;  // table / keyspace / topic
  std::optional<std::uint64_t> timeout_us;
  std::uint32_t retries = 0;
  OnError on_error = OnError::kPropagate;
  bool async = false;
  std::optional<BugFlag> bug;
  std::string produces;
  std::string uses;
  std::string mirror;
  std::size_t line = 0;

  bool IsCall() const {
    return endpoint.component == Component::kRPC || endpoint.component == Component::kHTTP;
  }
  /// Operation name recorded on the step's span.
  std::string Op() const;
};

struct InterfaceSpec {
  std::string method;
  std::string uri_template;
  std::vector<Step> workflow;
  bool session = false;
  bool ts = false;
  bool idem = false;
  bool sign = false;
  std::map<std::string, std::string> statics;
  std::size_t line = 0;

  std::string RequestLine() const { return method + " " + uri_template; }
};

struct ServiceSpec {
  std::string name;
  std::uint32_t workers = 4;
  std::vector<InterfaceSpec> interfaces;
  std::size_t line = 0;

  std::set<BugFlag> BugFlags() const;
};

struct ComponentDecl {
  Component component = Component::kDatabase;
  std::string framework;
  auto operator<=>(const ComponentDecl&) const = default;
};

/// A seeded bug located at one workflow step.
struct SeededBug {
  std::string id;  // "<service>/<flag>/<endpoint>"
  std::string service;
  BugFlag flag = BugFlag::kMissingTimeout;
  Endpoint endpoint;
  std::string op;
};

struct TopologySpec {
  std::string name = "topology";
  std::uint64_t seed = 0;
  std::vector<ComponentDecl> components;
  std::vector<ServiceSpec> services;

  const ServiceSpec* FindService(std::string_view name) const;
  /// Interface of `service` declared as (method, uri_template).
  const InterfaceSpec* FindInterface(std::string_view service, std::string_view method,
                                     std::string_view uri_template) const;
  std::vector<SeededBug> Bugs() const;
  /// Ground-truth async flag of the step recorded as (service, endpoint, op).
  bool IsAsync(const std::string& service, const Endpoint& endpoint, const std::string& op) const;
  /// Every step fixed: timeouts set, async writes made synchronous, errors propagated.
  TopologySpec WithoutBugs() const;
  /// Digest of the canonical text form.
  std::string Digest() const;
  std::size_t InterfaceCount() const;
};

/// Parses and validates; throws ParseError / ValidationError naming the line.
TopologySpec ParseTopology(std::istream& in);
TopologySpec LoadTopology(const std::string& path);
/// Canonical text; ParseTopology(WriteTopology(t)) reproduces t (line numbers aside).
void WriteTopology(std::ostream& out, const TopologySpec& spec);
/// Throws ValidationError on the first violated invariant.
void ValidateTopology(const TopologySpec& spec);

/// True when `uri` matches the template ("{x}" matches one non-empty segment).
bool UriMatches(std::string_view uri_template, std::string_view uri);
/// Values of the template's parameters in `uri`, in order.
std::vector<std::string> UriParams(std::string_view uri_template, std::string_view uri);

}  // namespace resilitest
