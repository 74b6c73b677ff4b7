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
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "resilitest/aggregation.hpp"
#include "resilitest/executor.hpp"
#include "resilitest/fault_catalog.hpp"
#include "resilitest/scheduler.hpp"
#include "resilitest/selection.hpp"
#include "resilitest/target_planner.hpp"
#include "resilitest/templating.hpp"
#include "resilitest/topology.hpp"

namespace resilitest {

struct Analysis {
  std::vector<InterfaceCluster> clusters;
  /// Every interface, best first.
  std::vector<Selection> ranked;
  std::map<std::string, TraceTemplate> templates;
  /// Fraction of recorded member traces whose root span succeeded.
  std::map<std::string, double> healthy_success;
  std::map<std::string, TraceFactors> factors;
};

/// Throws ValidationError on an empty corpus.
Analysis Analyze(const Corpus& corpus, const ManualVariableRegistry& registry,
                 const ComplexityWeights& weights, const DrainParams& params = {});

/// Writes clusters.txt, templates.jsonl, baseline.txt and selection.txt.
void WriteAnalysis(const Analysis& analysis, const std::string& dir);
/// Reads back what Plan and RunCampaign need (clusters are not re-read).
Analysis LoadAnalysis(const std::string& dir);

inline constexpr std::size_t kAllInterfaces = std::numeric_limits<std::size_t>::max();

struct PlanOptions {
  std::size_t top_k = 10;
  std::size_t n_services = 3;
  std::uint64_t seed = 0;
};

struct CampaignPlan {
  std::size_t top_k = 0;
  std::vector<std::string> interfaces;  // chosen, in rank order
  std::vector<std::string> skipped_interfaces;
  std::vector<TestCase> cases;
  RunPlan runs;
};

/// Top-K selection, target planning and greedy batching. With a non-empty
/// history, interfaces whose cases all passed in the current epoch (or that
/// yield no new case) are passed over in favour of the next ranked ones.
/// `topology` supplies the ground-truth async flags and may be null.
CampaignPlan Plan(const Corpus& corpus, std::span<const Selection> ranked,
                  const TopologySpec* topology, const FaultCatalog& catalog,
                  const PlanOptions& options, const History& history = {});

/// Writes plan.txt, runplan.txt and meta.txt.
void WriteCampaignPlan(const CampaignPlan& plan, const std::string& dir);
CampaignPlan LoadCampaignPlan(const std::string& dir);

struct CampaignOutcome {
  CampaignResult result;
  CampaignSummary summary;
};

/// Drops cases already passed in the history's epoch, executes the rest and
/// records their verdicts into `history` (when given).
CampaignOutcome RunCampaign(const CampaignPlan& plan, const CampaignInputs& inputs,
                            const ExecutorConfig& config, History* history);

/// Human-readable summary of one report, or a sensitivity table across
/// several (ordered by top_k) with cumulative coverage columns.
std::string FormatReports(std::span<const ReportFile> reports, const TopologySpec* topology);

struct ReplayOutcome {
  std::size_t interfaces = 0;
  std::size_t succeeded = 0;
  std::vector<std::string> failed;  // interface ids
  /// `<interface_id> <status>` per interface, sorted.
  std::string listing;
};

/// Instantiates every template once against a fresh healthy system.
ReplayOutcome CheckReplay(const TopologySpec& topology,
                          const std::map<std::string, TraceTemplate>& templates, std::uint64_t seed);

/// Seeded bugs whose (service, endpoint) occurs in some corpus trace.
std::set<std::string> ReachableBugs(const TopologySpec& topology, const Corpus& corpus);

}  // namespace resilitest
