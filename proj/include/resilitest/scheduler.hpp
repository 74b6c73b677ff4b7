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


// Startup-amortized batching of test cases and execution history.
//
// Cases are keyed by the (endpoint, service) pair they exercise, so any trace
// containing that pair can host them. The greedy batcher repeatedly picks the
// trace hosting the most not-yet-covered pairs and moves every pending case it
// can host into one run.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resilitest/target_planner.hpp"
#include "resilitest/trace.hpp"
#include "resilitest/verdict.hpp"

namespace resilitest {

using CoveragePair = std::pair<Endpoint, std::string>;  // (endpoint, service)

CoveragePair PairOf(const TestCase& tc);

/// The pairs a trace exercises, each with the position of its last span.
struct CoverageTrace {
  std::string trace_id;
  std::string interface_id;
  std::map<CoveragePair, std::size_t> pairs;
};

CoverageTrace CoverageOf(const Trace& trace, const std::string& interface_id);

struct Run {
  std::string trace_id;
  std::string interface_id;
  std::vector<TestCase> cases;

  bool operator==(const Run&) const = default;
};

struct RunPlan {
  std::vector<Run> runs;

  bool operator==(const RunPlan&) const = default;
  std::size_t CaseCount() const;
};

/// Throws ValidationError when a case's pair is hosted by none of `traces`.
/// Cases moved into a run are re-bound to the run's trace; case_id is kept.
RunPlan GreedyBatch(std::span<const TestCase> cases, std::span<const CoverageTrace> traces);

/// `run <index> <trace_id> <interface_id>` followed by its case lines.
void WriteRunPlan(std::ostream& out, const RunPlan& plan);
RunPlan ReadRunPlan(std::istream& in);

/// Append-only outcome log, partitioned into epochs by resets.
class History {
 public:
  struct Record {
    std::uint64_t epoch = 0;
    std::string case_id;  // "-" for a reset marker
    std::string verdict;  // verdict name, or "RESET"
    std::uint64_t timestamp = 0;
    bool operator==(const Record&) const = default;
  };

  void RecordOutcome(const std::string& case_id, Verdict verdict);
  /// Starts a fresh epoch; earlier outcomes stop counting.
  void Reset();

  std::uint64_t epoch() const { return epoch_; }
  /// Latest verdict of `case_id` in the current epoch.
  std::optional<Verdict> Lookup(const std::string& case_id) const;
  bool PassedInEpoch(const std::string& case_id) const;
  bool empty() const { return current_.empty(); }
  const std::map<std::string, Verdict>& current() const { return current_; }
  const std::vector<Record>& records() const { return records_; }

  /// `epoch case_id verdict timestamp` per line.
  static History Parse(std::istream& in);
  /// A missing file is an empty history.
  static History Load(const std::string& path);
  void Write(std::ostream& out) const;
  void Save(const std::string& path) const;

  bool operator==(const History&) const = default;

 private:
  void Apply(const Record& r);

  std::uint64_t epoch_ = 0;
  std::uint64_t clock_ = 0;
  std::map<std::string, Verdict> current_;
  std::vector<Record> records_;
};

struct FilteredCases {
  std::vector<TestCase> fresh;
  std::vector<TestCase> skipped;
};

/// A case is skipped iff it passed in the current epoch.
FilteredCases FilterHistory(std::span<const TestCase> cases, const History& history);

}  // namespace resilitest
