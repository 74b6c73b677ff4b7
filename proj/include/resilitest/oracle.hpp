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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "resilitest/simulator.hpp"
#include "resilitest/verdict.hpp"

namespace resilitest {

/// Entry success-rate thresholds of the three phases.
struct Thresholds {
  double startup_min_success = 1.0;
  double inject_max_success = 0.30;
  double recover_min_success = 0.80;

  /// Requires 0 <= inject_max < recover_min <= startup_min <= 1.
  void Validate() const;
  bool operator==(const Thresholds&) const = default;
};

inline constexpr double kCriteriaMargin = 0.05;

class OracleCriteria {
 public:
  OracleCriteria() = default;
  explicit OracleCriteria(Thresholds defaults);

  const Thresholds& defaults() const { return defaults_; }
  const std::map<std::string, Thresholds>& overrides() const { return overrides_; }
  const Thresholds& For(const std::string& interface_id) const;
  void Set(const std::string& interface_id, const Thresholds& t);

  /// Lines `default k=v ...` and `interface <id> k=v ...`, keys startup_min,
  /// inject_max, recover_min. Lines apply on top of `base`; an interface line
  /// starts from that interface's current thresholds.
  static OracleCriteria Parse(std::istream& in, OracleCriteria base = {});
  static OracleCriteria Load(const std::string& path, OracleCriteria base = {});
  void Write(std::ostream& out) const;

  bool operator==(const OracleCriteria&) const = default;

 private:
  Thresholds defaults_;
  std::map<std::string, Thresholds> overrides_;
};

/// recover_min = min(default, healthy - margin) per interface. A derived value
/// that would fall to or below inject_max is left at inject_max + margin.
OracleCriteria DeriveCriteria(const std::map<std::string, double>& healthy_success,
                              const Thresholds& defaults = {}, double margin = kCriteriaMargin);

/// Metrics of one phase at both assertion levels.
struct PhaseMetrics {
  EntryMetrics entry;
  std::uint64_t injection_hits = 0;
  std::uint64_t endpoint_failures = 0;
  bool downstream_ok = true;

  bool operator==(const PhaseMetrics&) const = default;
};

struct RunMetrics {
  std::optional<PhaseMetrics> startup;
  std::optional<PhaseMetrics> injection;
  std::optional<PhaseMetrics> recovery;
};

/// Throws ValidationError when a phase is missing or has no samples.
/// With `entry_only` the endpoint-level assertions are ignored.
Verdict Evaluate(const RunMetrics& metrics, const Thresholds& criteria, bool entry_only = false);

}  // namespace resilitest
