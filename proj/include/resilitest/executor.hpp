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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "resilitest/fault_catalog.hpp"
#include "resilitest/oracle.hpp"
#include "resilitest/scheduler.hpp"
#include "resilitest/simulator.hpp"
#include "resilitest/templating.hpp"
#include "resilitest/topology.hpp"

namespace resilitest {

struct PhaseSpec {
  std::uint64_t duration_us = 60'000'000;
  double rate_rps = 10.0;
  bool operator==(const PhaseSpec&) const = default;
};

struct PhaseConfig {
  PhaseSpec startup;
  PhaseSpec injection;
  PhaseSpec recovery;
  /// Traffic-free gap after each phase before its metrics are read.
  std::uint64_t settle_us = kEntryTimeoutUs;

  /// Throws ValidationError unless every duration and rate is positive.
  void Validate() const;
  /// "startup_s,inject_s,recover_s[@rps]", e.g. "60,60,60@10".
  static PhaseConfig Parse(std::string_view text);
};

struct TestRun {
  TestCase test_case;
  /// 0-based index of the system start that hosted the case.
  std::size_t startup = 0;
  PhaseMetrics startup_phase;
  PhaseMetrics injection_phase;
  PhaseMetrics recovery_phase;
  Verdict verdict = Verdict::kPass;
  /// Simulator ground truth, for scoring only: seeded bugs that fired while
  /// the case ran.
  std::vector<std::string> bugs_triggered;
  std::string error;  // simulator error text behind a STARTUP_FAILURE
};

struct ExecutorConfig {
  PhaseConfig phases;
  std::uint64_t seed = 0;
  bool entry_only_oracle = false;
  std::size_t parallel = 1;
};

/// Everything a campaign reads; all references must outlive the call.
struct CampaignInputs {
  const TopologySpec* topology = nullptr;
  const FaultCatalog* catalog = nullptr;
  const std::map<std::string, TraceTemplate>* templates = nullptr;  // by interface_id
  const OracleCriteria* criteria = nullptr;
};

struct CampaignResult {
  std::vector<TestRun> runs;  // wave, then run index, then case order
  std::size_t startups = 0;
  std::size_t reschedules = 0;
};

/// Executes one run on a fresh system: shared startup, then each case in
/// order until the first non-PASS verdict. Returns the executed TestRuns;
/// the cases left over are appended to `deferred`.
std::vector<TestRun> RunTest(const Run& run, std::size_t startup_index, const CampaignInputs& in,
                             const ExecutorConfig& config, std::vector<TestCase>& deferred);

/// Fail-fast campaign: deferred cases of wave w form fresh runs of wave w+1.
CampaignResult RunBatch(const RunPlan& plan, const CampaignInputs& in, const ExecutorConfig& config);

struct CampaignSummary {
  std::size_t top_k = 0;
  std::size_t cases = 0;
  std::size_t startups = 0;
  std::size_t reschedules = 0;
  std::size_t skipped = 0;
  std::map<Verdict, std::size_t> verdicts;
  /// "<service> <endpoint>" of every executed case.
  std::set<std::string> covered_pairs;
  /// Seeded bugs fired by a non-PASS case (simulator ground truth).
  std::set<std::string> detected_bugs;
  std::size_t seeded_bugs = 0;

  std::size_t failures() const;
};

CampaignSummary Summarize(const CampaignResult& result, const TopologySpec& topology,
                          std::size_t top_k, std::size_t skipped);

/// One JSON object per TestRun, then one `{"summary": ...}` line.
void WriteReport(std::ostream& out, const CampaignResult& result, const CampaignSummary& summary);

struct ReportFile {
  std::vector<TestRun> runs;
  CampaignSummary summary;
};
ReportFile ReadReport(std::istream& in);
ReportFile LoadReport(const std::string& path);

}  // namespace resilitest
