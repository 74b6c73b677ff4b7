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


// Deterministic virtual-time simulator of the system under test.
//
// Every service owns a fixed worker pool and a database connection pool of
// the same size. Entry requests pass gateway validation (timestamp skew,
// single-use sessions and idempotency keys, signatures), then run the
// interface workflow. Faults armed on (service, endpoint) intercept every
// matching step attempt of that service.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resilitest/fault_catalog.hpp"
#include "resilitest/templating.hpp"
#include "resilitest/topology.hpp"
#include "resilitest/trace.hpp"

namespace resilitest {

/// Wall clock = epoch offset + virtual clock.
inline constexpr std::uint64_t kWallEpochUs = 1'700'000'000'000'000ULL;
inline constexpr std::uint64_t kEntryTimeoutUs = 10'000'000;
inline constexpr std::uint64_t kStartupCostUs = 30'000'000;
inline constexpr std::uint64_t kMaxClockSkewUs = 30'000'000;

struct SystemOptions {
  bool record_traces = false;
};

struct EntryResponse {
  int status = 0;
  Payload body;
  bool ok() const { return status >= 200 && status < 300; }
};

/// Virtual-time interval [start_us, end_us).
struct MetricsWindow {
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;
};

struct EntryMetrics {
  std::uint64_t requests = 0;
  std::uint64_t completed = 0;
  std::uint64_t successes = 0;
  /// Empty when no request was submitted in the window.
  std::optional<double> success_rate;
  double p50_ms = 0;
  double p95_ms = 0;
  double throughput_rps = 0;
};

struct EndpointCounters {
  std::uint64_t invocations = 0;
  std::uint64_t failures = 0;
  std::uint64_t fault_hits = 0;
};

using ServiceEndpoint = std::pair<std::string, Endpoint>;

struct SystemMetrics {
  EntryMetrics entry;
  std::map<ServiceEndpoint, EndpointCounters> endpoints;
  /// Acknowledged requests (submitted in the window) that lost a write.
  std::uint64_t lost_acked = 0;
  /// Database/cache mirrors agree at collection time.
  bool mirrors_consistent = true;

  bool downstream_ok() const { return lost_acked == 0 && mirrors_consistent; }
  EndpointCounters At(const std::string& service, const Endpoint& endpoint) const;
};

class System {
 public:
  System(const TopologySpec& spec, std::uint64_t seed, SystemOptions options = {});
  ~System();
  System(const System&) = delete;
  System& operator=(const System&) = delete;

  std::uint64_t now_us() const;
  std::uint64_t wall_us() const { return kWallEpochUs + now_us(); }
  /// Runs all events up to `virtual_us` (never moves backwards).
  void AdvanceTo(std::uint64_t virtual_us);
  void AdvanceBy(std::uint64_t us) { AdvanceTo(now_us() + us); }

  /// Submits an entry request at the current time; returns its ticket.
  std::size_t Submit(const EntryRequest& request);
  bool Done(std::size_t ticket) const;
  /// Response of a completed request; throws ValidationError otherwise.
  const EntryResponse& Response(std::size_t ticket) const;
  /// Spans recorded for the request (record_traces only). Async spans
  /// still running or outliving their parent are clipped to the parent.
  Trace RecordedTrace(std::size_t ticket, const std::string& trace_id) const;

  /// The gateway's `POST /auth/sign` endpoint: signature for the request's ts.
  std::string Sign(const EntryRequest& request) const;

  /// Throws ValidationError when the service never invokes the endpoint.
  void Arm(const std::string& service, const Endpoint& endpoint, const FaultSpec& fault);
  void Disarm(const std::string& service, const Endpoint& endpoint);
  void DisarmAll();
  /// Total hits of the fault armed (now or earlier) on the pair.
  std::uint64_t Hits(const std::string& service, const Endpoint& endpoint) const;

  /// Throws ValidationError when the window ends after the current time.
  SystemMetrics CollectMetrics(const MetricsWindow& window) const;
  /// Seeded bugs whose failure mode fired inside the window (ids, sorted).
  std::vector<std::string> TriggeredBugs(const MetricsWindow& window) const;
  /// Messages delivered on an MQ topic so far.
  std::uint64_t Delivered(const std::string& topic) const;
  /// Drops bookkeeping for entry requests submitted, and invocations started,
  /// before `virtual_us`.
  void Compact(std::uint64_t virtual_us);

  class Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// One line per request: `<virtual_ms> <METHOD> <uri> [key=value ...]`.
/// Values `@fresh`, `@now` and `@sign` are filled in at submission.
struct WorkloadEntry {
  std::uint64_t at_us = 0;
  std::string method;
  std::string uri;
  std::vector<std::pair<std::string, std::string>> fields;
};

std::vector<WorkloadEntry> ParseWorkload(std::istream& in);
std::vector<WorkloadEntry> LoadWorkload(const std::string& path);

/// Runs the healthy system under the workload and records every request.
Corpus SimulateRecord(const TopologySpec& spec, std::span<const WorkloadEntry> workload,
                      std::uint64_t seed);

}  // namespace resilitest
