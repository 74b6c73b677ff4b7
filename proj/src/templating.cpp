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

#include "resilitest/templating.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "json.hpp"

namespace resilitest {

using Json = nlohmann::ordered_json;

std::string_view SideName(PayloadSide side) {
  return side == PayloadSide::kRequest ? "req" : "resp";
}

std::string_view KindName(PlaceholderKind kind) {
  switch (kind) {
    case PlaceholderKind::kFreshId:
      return "fresh_id";
    case PlaceholderKind::kTimestamp:
      return "timestamp";
    case PlaceholderKind::kOpaqueCopy:
      return "opaque_copy";
  }
  return "fresh_id";
}

PayloadSide ParseSide(std::string_view text) {
  if (text == "req") return PayloadSide::kRequest;
  if (text == "resp") return PayloadSide::kResponse;
  throw ParseError("payload side must be req or resp, got '" + std::string(text) + "'", 0);
}

PlaceholderKind ParseKind(std::string_view text) {
  if (text == "fresh_id") return PlaceholderKind::kFreshId;
  if (text == "timestamp") return PlaceholderKind::kTimestamp;
  if (text == "opaque_copy") return PlaceholderKind::kOpaqueCopy;
  throw ParseError("unknown placeholder kind '" + std::string(text) + "'", 0);
}

// ---------------------------------------------------------------------------
// Registry

bool ManualVariableRegistry::ValidKeyPath(std::string_view path) {
  if (path.empty()) return false;
  for (const auto& part : Split(path, '.')) {
    if (part.empty()) return false;
    for (char c : part) {
      if (std::isspace(static_cast<unsigned char>(c)) || c == '#') return false;
    }
  }
  return true;
}

void ManualVariableRegistry::Register(const Entry& entry, std::string note) {
  if (!ValidKeyPath(entry.key_path)) {
    throw ValidationError("invalid key path '" + entry.key_path + "'");
  }
  Deregister(entry.interface_id, entry.side, entry.key_path);
  entries_.emplace(entry, std::move(note));
}

void ManualVariableRegistry::Deregister(const std::string& interface_id, PayloadSide side,
                                        const std::string& key_path) {
  for (auto it = entries_.begin(); it != entries_.end();) {
    const Entry& e = it->first;
    if (e.interface_id == interface_id && e.side == side && e.key_path == key_path) {
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<ManualVariableRegistry::Entry> ManualVariableRegistry::EntriesFor(
    const std::string& interface_id) const {
  std::vector<Entry> out;
  for (const auto& [e, note] : entries_) {
    if (e.interface_id == interface_id) out.push_back(e);
  }
  return out;
}

void ManualVariableRegistry::Merge(const ManualVariableRegistry& other) {
  for (const auto& [e, note] : other.entries_) {
    auto it = entries_.find(e);
    if (it == entries_.end()) {
      Register(e, note);
    } else if (note < it->second) {
      it->second = note;
    }
  }
}

ManualVariableRegistry ManualVariableRegistry::Parse(std::istream& in) {
  ManualVariableRegistry reg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string note;
    auto hash = line.find('#');
    if (hash != std::string::npos) {
      note = std::string(Trim(std::string_view(line).substr(hash + 1)));
      line.resize(hash);
    }
    auto fields = SplitWhitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != 4) {
      throw ParseError("expected '<interface_id> <req|resp> <key-path> <kind>'", line_no);
    }
    try {
      Entry e{fields[0], ParseSide(fields[1]), fields[2], ParseKind(fields[3])};
      reg.Register(e, note);
    } catch (const ParseError& err) {
      throw ParseError(err.what(), line_no);
    } catch (const ValidationError& err) {
      throw ParseError(err.what(), line_no);
    }
  }
  return reg;
}

ManualVariableRegistry ManualVariableRegistry::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return Parse(in);
}

void ManualVariableRegistry::Write(std::ostream& out) const {
  for (const auto& [e, note] : entries_) {
    out << e.interface_id << ' ' << SideName(e.side) << ' ' << e.key_path << ' '
        << KindName(e.kind);
    if (!note.empty()) out << " # " << note;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Two-stage heuristic

std::set<std::string> FindIntraspanCandidates(const Span& span) {
  std::set<std::string_view> response_values;
  for (const auto& [k, v] : span.resp) response_values.insert(v);
  std::set<std::string> out;
  for (const auto& [k, v] : span.req) {
    if (response_values.count(v)) out.insert(k);
  }
  return out;
}

std::set<std::string> ConfirmDynamicVariables(std::span<const Span> spans,
                                              std::size_t min_instances) {
  if (min_instances < 2) min_instances = 2;
  if (spans.size() < min_instances) {
    throw InsufficientEvidence("need " + std::to_string(min_instances) + " spans, got " +
                               std::to_string(spans.size()));
  }
  std::set<std::string> candidates;
  for (const Span& s : spans) {
    auto c = FindIntraspanCandidates(s);
    candidates.insert(c.begin(), c.end());
  }
  std::set<std::string> out;
  for (const auto& path : candidates) {
    const std::string* first = nullptr;
    for (const Span& s : spans) {
      auto it = s.req.find(path);
      if (it == s.req.end()) continue;
      if (first == nullptr) {
        first = &it->second;
      } else if (*first != it->second) {
        out.insert(path);
        break;
      }
    }
  }
  return out;
}

namespace {

bool ParsesAsTimestamp(const std::string& value, const RecordingWindow& window) {
  if (value.empty() || window.end_us == 0) return false;
  std::uint64_t parsed = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) return false;
  return window.Contains(parsed);
}

using SpanSignature = std::vector<std::tuple<std::string, Endpoint, std::string>>;

SpanSignature SignatureOf(const Trace& t) {
  SpanSignature sig;
  sig.reserve(t.spans.size());
  for (const Span& s : t.spans) sig.emplace_back(s.service, s.endpoint, s.op);
  return sig;
}

RecordingWindow WindowOf(std::span<const Trace> traces) {
  RecordingWindow w;
  bool first = true;
  for (const Trace& t : traces) {
    if (t.spans.empty()) continue;
    auto idx = t.IndexOf(t.root);
    const Span& r = idx ? t.spans[*idx] : t.spans.front();
    if (first) {
      w = {r.start_us, r.end_us()};
      first = false;
    } else {
      w.start_us = std::min(w.start_us, r.start_us);
      w.end_us = std::max(w.end_us, r.end_us());
    }
  }
  return w;
}

}  // namespace

TraceTemplate BuildTemplate(std::span<const Trace> cluster_traces,
                            const ManualVariableRegistry& registry,
                            const std::string& interface_id, const TemplateOptions& options) {
  if (cluster_traces.empty()) throw ValidationError("cannot template an empty cluster");
  if (options.representative >= cluster_traces.size()) {
    throw ValidationError("representative index out of range");
  }
  const RecordingWindow window =
      options.window.end_us == 0 ? WindowOf(cluster_traces) : options.window;

  TraceTemplate tmpl;
  tmpl.interface_id = interface_id;
  tmpl.base_trace = cluster_traces[options.representative];
  const Trace& base = tmpl.base_trace;
  const auto root_pos = base.IndexOf(base.root);
  if (!root_pos) throw ValidationError("representative trace has no root span");

  const SpanSignature base_sig = SignatureOf(base);
  std::vector<const Trace*> aligned;
  for (const Trace& t : cluster_traces) {
    if (SignatureOf(t) == base_sig) aligned.push_back(&t);
  }

  for (std::size_t pos = 0; pos < base.spans.size(); ++pos) {
    std::vector<Span> instances;
    if (pos == *root_pos) {
      for (const Trace& t : cluster_traces) {
        auto r = t.IndexOf(t.root);
        if (r) instances.push_back(t.spans[*r]);
      }
    } else {
      for (const Trace* t : aligned) instances.push_back(t->spans[pos]);
    }
    std::set<std::string> dynamic;
    try {
      dynamic = ConfirmDynamicVariables(instances, options.min_instances);
    } catch (const InsufficientEvidence&) {
      continue;  // no evidence, no automatic variables
    }
    for (const auto& path : dynamic) {
      if (!base.spans[pos].req.count(path)) continue;
      bool all_timestamps = true;
      for (const Span& s : instances) {
        auto it = s.req.find(path);
        if (it != s.req.end() && !ParsesAsTimestamp(it->second, window)) {
          all_timestamps = false;
          break;
        }
      }
      DynamicPath dp{pos, PayloadSide::kRequest, path};
      tmpl.dynamic_paths.insert(dp);
      tmpl.placeholder_kinds[dp] =
          all_timestamps ? PlaceholderKind::kTimestamp : PlaceholderKind::kFreshId;
    }
  }

  for (const auto& entry : registry.EntriesFor(interface_id)) {
    const Span& root = base.spans[*root_pos];
    const Payload& payload = entry.side == PayloadSide::kRequest ? root.req : root.resp;
    if (!payload.count(entry.key_path)) continue;
    DynamicPath dp{*root_pos, entry.side, entry.key_path};
    tmpl.dynamic_paths.insert(dp);
    tmpl.placeholder_kinds[dp] = entry.kind;
  }
  return tmpl;
}

// ---------------------------------------------------------------------------
// Instantiation

std::string IdSource::Next() {
  static constexpr char kAlphabet[] = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::uint64_t h = MixSeed(seed_, counter_);
  std::string out;
  for (int i = 0; i < 6; ++i) {
    out.push_back(kAlphabet[h % 36]);
    h /= 36;
  }
  // The counter suffix makes ids from one source unique.
  std::uint64_t c = counter_++;
  do {
    out.push_back(kAlphabet[c % 36]);
    c /= 36;
  } while (c != 0);
  return out;
}

EntryRequest RootRequest(const Trace& trace) {
  const Span& root = trace.RootSpan();
  auto parts = SplitWhitespace(root.op);
  if (parts.size() != 2) {
    throw ValidationError("root op '" + root.op + "' is not a request line");
  }
  return EntryRequest{parts[0], parts[1], root.req};
}

EntryRequest Instantiate(const TraceTemplate& tmpl, const InstantiationContext& context) {
  EntryRequest request = RootRequest(tmpl.base_trace);
  const auto root_pos = *tmpl.base_trace.IndexOf(tmpl.base_trace.root);
  std::vector<std::string> opaque;
  for (const DynamicPath& dp : tmpl.dynamic_paths) {
    if (dp.span_position != root_pos || dp.side != PayloadSide::kRequest) continue;
    auto kind = tmpl.placeholder_kinds.find(dp);
    if (kind == tmpl.placeholder_kinds.end()) {
      throw ValidationError("unknown placeholder kind for " + dp.key_path);
    }
    switch (kind->second) {
      case PlaceholderKind::kFreshId:
        if (context.ids == nullptr) throw ValidationError("fresh_id placeholder needs an id source");
        request.payload[dp.key_path] = context.ids->Next();
        break;
      case PlaceholderKind::kTimestamp:
        request.payload[dp.key_path] = std::to_string(context.now_us);
        break;
      case PlaceholderKind::kOpaqueCopy:
        opaque.push_back(dp.key_path);
        break;
    }
  }
  // Opaque values usually depend on the rest of the request (signatures).
  if (context.resolve_opaque) {
    for (const auto& path : opaque) request.payload[path] = context.resolve_opaque(path, request);
  }
  return request;
}

// ---------------------------------------------------------------------------
// Persistence

std::string TemplateToJsonLine(const TraceTemplate& tmpl) {
  Json j;
  j["interface_id"] = tmpl.interface_id;
  j["base_trace"] = Json::parse(TraceToJsonLine(tmpl.base_trace));
  Json dyn = Json::array();
  for (const DynamicPath& dp : tmpl.dynamic_paths) {
    auto kind = tmpl.placeholder_kinds.find(dp);
    dyn.push_back({{"pos", dp.span_position},
                   {"side", std::string(SideName(dp.side))},
                   {"path", dp.key_path},
                   {"kind", kind == tmpl.placeholder_kinds.end()
                                ? std::string("unknown")
                                : std::string(KindName(kind->second))}});
  }
  j["dynamic"] = std::move(dyn);
  return j.dump();
}

TraceTemplate TemplateFromJsonLine(std::string_view line, std::size_t line_no) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed template record: ") + e.what(), line_no);
  }
  TraceTemplate tmpl;
  try {
    tmpl.interface_id = j.at("interface_id").get<std::string>();
    tmpl.base_trace = TraceFromJsonLine(j.at("base_trace").dump(), line_no);
    for (const Json& d : j.at("dynamic")) {
      DynamicPath dp{d.at("pos").get<std::size_t>(), ParseSide(d.at("side").get<std::string>()),
                     d.at("path").get<std::string>()};
      tmpl.dynamic_paths.insert(dp);
      tmpl.placeholder_kinds[dp] = ParseKind(d.at("kind").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad template record: ") + e.what(), line_no);
  } catch (const ParseError& e) {
    throw ParseError(e.what(), line_no);
  }
  return tmpl;
}

}  // namespace resilitest
