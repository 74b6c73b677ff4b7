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

// Span/trace data model and the line-delimited corpus format.
//
// Payloads are flattened: nested documents become "a.b.c" key paths mapping
// to scalar strings. Times are microseconds on the simulator's wall clock.

#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace resilitest {

enum class Component { kDatabase, kCache, kMQ, kRPC, kHTTP };

std::string_view ComponentName(Component c);
std::optional<Component> ParseComponent(std::string_view name);

/// The (Component, Framework, Method) injection-target tuple.
struct Endpoint {
  Component component = Component::kHTTP;
  std::string framework;
  std::string method;

  auto operator<=>(const Endpoint&) const = default;
  bool operator==(const Endpoint&) const = default;

  /// "Database/sqlclient/update"
  std::string ToString() const;
  /// Inverse of ToString; throws ParseError.
  static Endpoint Parse(std::string_view text);
  bool Valid() const { return !framework.empty() && !method.empty(); }
};

using Payload = std::map<std::string, std::string>;

struct SpanStatus {
  bool ok = true;
  int code = 0;

  bool operator==(const SpanStatus&) const = default;
  static SpanStatus Ok() { return {}; }
  static SpanStatus Failed(int code) { return {false, code}; }
  /// "ok" or "error:<code>"
  std::string ToString() const;
  static SpanStatus Parse(std::string_view text);
};

struct Span {
  std::string id;
  std::optional<std::string> parent;
  std::string service;
  Endpoint endpoint;
  std::string op;
  Payload req;
  Payload resp;
  SpanStatus status;
  std::uint64_t start_us = 0;
  std::uint64_t dur_us = 0;

  bool operator==(const Span&) const = default;
  std::uint64_t end_us() const { return start_us + dur_us; }
};

struct Trace {
  std::string trace_id;
  std::vector<Span> spans;
  std::string root;

  bool operator==(const Trace&) const = default;

  const Span& RootSpan() const;
  /// Index of the span with the given id, if present.
  std::optional<std::size_t> IndexOf(std::string_view span_id) const;
};

struct RecordingWindow {
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;
  bool operator==(const RecordingWindow&) const = default;
  bool Contains(std::uint64_t t) const { return t >= start_us && t <= end_us; }
};

struct CorpusMetadata {
  std::uint64_t seed = 0;
  std::string topology_digest = "0000000000000000";
  /// Derived from root spans; not serialized.
  RecordingWindow window;

  bool operator==(const CorpusMetadata&) const = default;
};

struct Corpus {
  CorpusMetadata metadata;
  std::vector<Trace> traces;

  bool operator==(const Corpus&) const = default;
  void RefreshWindow();
};

struct Violation {
  std::string span_id;
  std::string rule;
  std::string detail;
  bool operator==(const Violation&) const = default;
};

/// Checks every Span/Trace invariant. Rules reported: "duplicate-id",
/// "multiple roots", "no root", "root-mismatch", "dangling-parent",
/// "negative-duration" (never produced for unsigned input), "containment",
/// "order", "endpoint".
std::vector<Violation> ValidateTrace(const Trace& trace);

/// Reorders spans into the canonical order: parents before children, ready
/// spans taken by (start_us, id).
void CanonicalizeOrder(Trace& trace);

/// Flattens a nested JSON document string into key paths.
Payload FlattenJson(std::string_view json_text);

inline constexpr std::string_view kCorpusMagic = "resilitest-corpus";
inline constexpr std::string_view kCorpusVersion = "v1";

std::string TraceToJsonLine(const Trace& trace);
Trace TraceFromJsonLine(std::string_view line, std::size_t line_no);

void WriteCorpus(std::ostream& out, const Corpus& corpus);
Corpus ReadCorpus(std::istream& in);
void SaveCorpus(const Corpus& corpus, const std::string& path);
Corpus LoadCorpus(const std::string& path);

}  // namespace resilitest
