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

// Declarative library of application-level faults.
//
// One fault per line:
//   <id> <category> <Component>/<framework|*>/<method|*> <effect> [args]
// effects:
//   throw <ExceptionName>
//   delay <duration|auto>        duration like 250ms, 5s, 1500us
//   status <code> [body=<text>]

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resilitest/trace.hpp"

namespace resilitest {

enum class FaultCategory {
  kPlatformException,
  kCommLatency,
  kCommProtocolError,
  kCommManipulatedResponse,
};

std::string_view CategoryName(FaultCategory c);
std::optional<FaultCategory> ParseCategory(std::string_view text);

struct EndpointMatcher {
  Component component = Component::kDatabase;
  std::optional<std::string> framework;  // nullopt = "*"
  std::optional<std::string> method;

  bool Matches(const Endpoint& endpoint) const;
  std::string ToString() const;
  bool operator==(const EndpointMatcher&) const = default;
};

struct FaultEffect {
  enum class Kind { kThrow, kDelay, kStatus };
  Kind kind = Kind::kThrow;
  std::string exception;                 // kThrow
  std::optional<std::uint64_t> delay_us; // kDelay; nullopt = derive from the target's timeout
  int status_code = 0;                   // kStatus
  std::optional<std::string> body;       // kStatus

  bool operator==(const FaultEffect&) const = default;
};

struct FaultSpec {
  std::string fault_id;
  FaultCategory category = FaultCategory::kPlatformException;
  EndpointMatcher applies_to;
  FaultEffect effect;

  bool operator==(const FaultSpec&) const = default;
  /// The record's textual form, re-parseable by ParseFaultLine.
  std::string ToLine() const;
};

/// Parses a single record; throws ParseError (line number 0).
FaultSpec ParseFaultLine(std::string_view line);

/// Duration literal: "<n>us", "<n>ms" or "<n>s".
std::uint64_t ParseDurationUs(std::string_view text);

/// Delay used when a delay fault does not state one.
inline constexpr std::uint64_t kDefaultDelayUs = 5'000'000;
std::uint64_t EffectiveDelayUs(const FaultEffect& effect, std::optional<std::uint64_t> timeout_us);

class FaultCatalog {
 public:
  FaultCatalog() = default;
  explicit FaultCatalog(std::vector<FaultSpec> faults);  // throws on duplicate ids

  static FaultCatalog Parse(std::istream& in);
  static FaultCatalog Load(const std::string& path);
  /// The shipped default library.
  static FaultCatalog BuiltIn();
  static std::string_view BuiltInText();

  /// Matching faults ordered by fault_id.
  std::vector<const FaultSpec*> FaultsFor(const Endpoint& endpoint) const;
  const FaultSpec* Find(std::string_view fault_id) const;
  const std::vector<FaultSpec>& faults() const { return faults_; }

 private:
  std::vector<FaultSpec> faults_;  // sorted by fault_id
};

}  // namespace resilitest
