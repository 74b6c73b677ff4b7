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

// Turns recorded traces into replayable templates.
//
// A request value is a dynamic variable when it is echoed verbatim somewhere
// in the same span's response (intra-span correlation) and its value is not
// constant across independent instances of the same operation (inter-span
// variability). Tokens are whole values at flattened key paths.

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "resilitest/common.hpp"
#include "resilitest/trace.hpp"

namespace resilitest {

enum class PayloadSide { kRequest, kResponse };
enum class PlaceholderKind { kFreshId, kTimestamp, kOpaqueCopy };

std::string_view SideName(PayloadSide side);          // "req" / "resp"
std::string_view KindName(PlaceholderKind kind);      // "fresh_id" / ...
PayloadSide ParseSide(std::string_view text);         // throws ParseError
PlaceholderKind ParseKind(std::string_view text);     // throws ParseError

struct DynamicPath {
  std::size_t span_position = 0;
  PayloadSide side = PayloadSide::kRequest;
  std::string key_path;

  auto operator<=>(const DynamicPath&) const = default;
};

struct TraceTemplate {
  std::string interface_id;
  Trace base_trace;
  std::set<DynamicPath> dynamic_paths;
  std::map<DynamicPath, PlaceholderKind> placeholder_kinds;

  bool operator==(const TraceTemplate&) const = default;
};

/// Thrown when fewer spans than `min_instances` are available.
class InsufficientEvidence : public Error {
 public:
  using Error::Error;
};

/// Operator-maintained overrides, keyed by interface.
class ManualVariableRegistry {
 public:
  struct Entry {
    std::string interface_id;
    PayloadSide side = PayloadSide::kRequest;
    std::string key_path;
    PlaceholderKind kind = PlaceholderKind::kOpaqueCopy;

    auto operator<=>(const Entry&) const = default;
  };

  /// Idempotent. Throws ValidationError for a syntactically invalid path.
  void Register(const Entry& entry, std::string note = {});
  /// Removes exactly the entry with this (interface, side, path); no-op when absent.
  void Deregister(const std::string& interface_id, PayloadSide side, const std::string& key_path);

  std::vector<Entry> EntriesFor(const std::string& interface_id) const;
  const std::map<Entry, std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool operator==(const ManualVariableRegistry&) const = default;

  /// Deterministic union; on conflicting notes the lexicographically smaller wins.
  void Merge(const ManualVariableRegistry& other);

  /// `<interface_id> <req|resp> <key-path> <kind> # note` per line.
  static ManualVariableRegistry Parse(std::istream& in);
  static ManualVariableRegistry Load(const std::string& path);
  void Write(std::ostream& out) const;

  static bool ValidKeyPath(std::string_view path);

 private:
  std::map<Entry, std::string> entries_;
};

/// Stage 1: request key paths whose value appears verbatim as some response value.
std::set<std::string> FindIntraspanCandidates(const Span& span);

/// Stage 2: candidates (from every span) whose value is not constant across
/// `spans`. Throws InsufficientEvidence when spans.size() < min_instances.
std::set<std::string> ConfirmDynamicVariables(std::span<const Span> spans,
                                              std::size_t min_instances = 2);

struct TemplateOptions {
  std::size_t min_instances = 2;
  /// Values that parse as integers inside this window are timestamps.
  RecordingWindow window;
  /// Index into cluster_traces of the representative (highest complexity).
  std::size_t representative = 0;
};

/// Throws ValidationError on empty input.
TraceTemplate BuildTemplate(std::span<const Trace> cluster_traces,
                            const ManualVariableRegistry& registry,
                            const std::string& interface_id, const TemplateOptions& options);

/// Deterministic generator of fresh identifiers.
class IdSource {
 public:
  explicit IdSource(std::uint64_t seed) : seed_(seed) {}
  std::string Next();

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct EntryRequest {
  std::string method;
  std::string uri;
  Payload payload;

  bool operator==(const EntryRequest&) const = default;
  std::string RequestLine() const { return method + " " + uri; }
};

/// Resolves an opaque_copy path from the live system; receives the request
/// with every other placeholder already filled.
using OpaqueResolver =
    std::function<std::string(const std::string& key_path, const EntryRequest& request)>;

struct InstantiationContext {
  std::uint64_t now_us = 0;
  IdSource* ids = nullptr;
  OpaqueResolver resolve_opaque;
};

/// Produces the entry request to replay. Throws ValidationError when a
/// dynamic path has no placeholder kind or the root request line is malformed.
EntryRequest Instantiate(const TraceTemplate& tmpl, const InstantiationContext& context);

/// Splits a root span op ("POST /a/b") into method and uri.
EntryRequest RootRequest(const Trace& trace);

std::string TemplateToJsonLine(const TraceTemplate& tmpl);
TraceTemplate TemplateFromJsonLine(std::string_view line, std::size_t line_no);

}  // namespace resilitest
