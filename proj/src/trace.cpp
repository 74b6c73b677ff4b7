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

#include "resilitest/trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "resilitest/common.hpp"

namespace resilitest {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kComponentNames[] = {"Database", "Cache", "MQ", "RPC", "HTTP"};

void FlattenInto(const nlohmann::json& node, const std::string& prefix, Payload& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      FlattenInto(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      FlattenInto(node[i], prefix.empty() ? std::to_string(i) : prefix + "." + std::to_string(i),
                  out);
    }
  } else if (node.is_string()) {
    out[prefix] = node.get<std::string>();
  } else if (node.is_null()) {
    out[prefix] = "";
  } else {
    out[prefix] = node.dump();
  }
}

Json PayloadToJson(const Payload& payload) {
  Json obj = Json::object();
  for (const auto& [k, v] : payload) obj[k] = v;
  return obj;
}

Payload PayloadFromJson(const Json& obj, std::size_t line_no, const char* field) {
  if (!obj.is_object()) throw ParseError(std::string(field) + " must be an object", line_no);
  Payload out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!it.value().is_string()) {
      throw ParseError(std::string(field) + "." + it.key() + " must be a string", line_no);
    }
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

template <typename T>
T Require(const Json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line_no);
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", line_no);
  }
}

}  // namespace

std::string_view ComponentName(Component c) { return kComponentNames[static_cast<int>(c)]; }

std::optional<Component> ParseComponent(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kComponentNames[i] == name) return static_cast<Component>(i);
  }
  return std::nullopt;
}

std::string Endpoint::ToString() const {
  return std::string(ComponentName(component)) + "/" + framework + "/" + method;
}

Endpoint Endpoint::Parse(std::string_view text) {
  auto parts = Split(text, '/');
  if (parts.size() != 3) throw ParseError("endpoint must be Component/framework/method", 0);
  auto component = ParseComponent(parts[0]);
  if (!component) throw ParseError("unknown component '" + parts[0] + "'", 0);
  Endpoint ep{*component, parts[1], parts[2]};
  if (!ep.Valid()) throw ParseError("endpoint fields must be non-empty", 0);
  return ep;
}

std::string SpanStatus::ToString() const {
  return ok ? std::string("ok") : "error:" + std::to_string(code);
}

SpanStatus SpanStatus::Parse(std::string_view text) {
  if (text == "ok") return Ok();
  if (text.substr(0, 6) == "error:") {
    try {
      return Failed(std::stoi(std::string(text.substr(6))));
    } catch (const std::exception&) {
    }
  }
  throw ParseError("bad status '" + std::string(text) + "'", 0);
}

const Span& Trace::RootSpan() const {
  for (const auto& s : spans) {
    if (s.id == root) return s;
  }
  throw ValidationError("trace " + trace_id + " has no root span");
}

std::optional<std::size_t> Trace::IndexOf(std::string_view span_id) const {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].id == span_id) return i;
  }
  return std::nullopt;
}

void Corpus::RefreshWindow() {
  RecordingWindow w;
  bool first = true;
  for (const auto& t : traces) {
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
  metadata.window = w;
}

std::vector<Violation> ValidateTrace(const Trace& trace) {
  std::vector<Violation> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < trace.spans.size(); ++i) {
    const Span& s = trace.spans[i];
    if (!index.emplace(s.id, i).second) {
      out.push_back({s.id, "duplicate-id", "span id appears more than once"});
    }
    if (!s.endpoint.Valid()) {
      out.push_back({s.id, "endpoint", "framework and method must be non-empty"});
    }
  }

  std::vector<std::string> roots;
  for (const Span& s : trace.spans) {
    if (!s.parent) roots.push_back(s.id);
  }
  if (roots.empty()) {
    out.push_back({"", "no root", "no span lacks a parent"});
  } else if (roots.size() > 1) {
    for (const auto& r : roots) out.push_back({r, "multiple roots", "span has no parent"});
  } else if (roots.front() != trace.root) {
    out.push_back({roots.front(), "root-mismatch", "parentless span is not the declared root"});
  }

  for (std::size_t i = 0; i < trace.spans.size(); ++i) {
    const Span& s = trace.spans[i];
    if (!s.parent) continue;
    auto it = index.find(*s.parent);
    if (it == index.end()) {
      out.push_back({s.id, "dangling-parent", "parent " + *s.parent + " not in trace"});
      continue;
    }
    const Span& p = trace.spans[it->second];
    if (s.start_us < p.start_us || s.end_us() > p.end_us()) {
      out.push_back({s.id, "containment", "interval escapes parent " + p.id});
    }
    if (it->second > i) {
      out.push_back({s.id, "order", "span precedes its parent " + p.id});
    }
  }

  // Ordering must match the canonical topological order when the parent
  // relation is otherwise sound.
  bool structural_ok = std::none_of(out.begin(), out.end(), [](const Violation& v) {
    return v.rule == "duplicate-id" || v.rule == "dangling-parent" || v.rule == "order" ||
           v.rule == "no root" || v.rule == "multiple roots";
  });
  if (structural_ok) {
    Trace canonical = trace;
    CanonicalizeOrder(canonical);
    for (std::size_t i = 0; i < trace.spans.size(); ++i) {
      if (canonical.spans[i].id != trace.spans[i].id) {
        out.push_back({trace.spans[i].id, "order", "not in start-time topological order"});
        break;
      }
    }
  }
  return out;
}

void CanonicalizeOrder(Trace& trace) {
  const std::size_t n = trace.spans.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(trace.spans[i].id, i);
  std::vector<std::vector<std::size_t>> children(n);
  using Key = std::tuple<std::uint64_t, std::string, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    const Span& s = trace.spans[i];
    auto it = s.parent ? index.find(*s.parent) : index.end();
    if (it == index.end()) {
      ready.emplace(s.start_us, s.id, i);
    } else {
      children[it->second].push_back(i);
    }
  }
  std::vector<Span> ordered;
  ordered.reserve(n);
  while (!ready.empty()) {
    auto [start, id, i] = ready.top();
    ready.pop();
    for (std::size_t c : children[i]) ready.emplace(trace.spans[c].start_us, trace.spans[c].id, c);
    ordered.push_back(std::move(trace.spans[i]));
  }
  // Cycles leave spans unplaced; keep them at the end so nothing is lost.
  if (ordered.size() != n) return;
  trace.spans = std::move(ordered);
}

Payload FlattenJson(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON payload: ") + e.what(), 0);
  }
  Payload out;
  FlattenInto(doc, "", out);
  return out;
}

std::string TraceToJsonLine(const Trace& trace) {
  Json spans = Json::array();
  for (const Span& s : trace.spans) {
    Json js;
    js["id"] = s.id;
    js["parent"] = s.parent ? Json(*s.parent) : Json(nullptr);
    js["service"] = s.service;
    js["endpoint"] = {{"component", std::string(ComponentName(s.endpoint.component))},
                      {"framework", s.endpoint.framework},
                      {"method", s.endpoint.method}};
    js["op"] = s.op;
    js["req"] = PayloadToJson(s.req);
    js["resp"] = PayloadToJson(s.resp);
    js["status"] = s.status.ToString();
    js["start_us"] = s.start_us;
    js["dur_us"] = s.dur_us;
    spans.push_back(std::move(js));
  }
  Json jt;
  jt["trace_id"] = trace.trace_id;
  jt["root"] = trace.root;
  jt["spans"] = std::move(spans);
  return jt.dump();
}

Trace TraceFromJsonLine(std::string_view line, std::size_t line_no) {
  Json jt;
  try {
    jt = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed trace record: ") + e.what(), line_no);
  }
  if (!jt.is_object()) throw ParseError("trace record must be an object", line_no);
  Trace t;
  t.trace_id = Require<std::string>(jt, "trace_id", line_no);
  t.root = Require<std::string>(jt, "root", line_no);
  auto spans = jt.find("spans");
  if (spans == jt.end() || !spans->is_array()) throw ParseError("missing spans[]", line_no);
  for (const Json& js : *spans) {
    if (!js.is_object()) throw ParseError("span must be an object", line_no);
    Span s;
    s.id = Require<std::string>(js, "id", line_no);
    auto parent = js.find("parent");
    if (parent != js.end() && !parent->is_null()) {
      if (!parent->is_string()) throw ParseError("parent must be a string or null", line_no);
      s.parent = parent->get<std::string>();
    }
    s.service = Require<std::string>(js, "service", line_no);
    auto ep = js.find("endpoint");
    if (ep == js.end() || !ep->is_object()) throw ParseError("missing endpoint", line_no);
    auto component = ParseComponent(Require<std::string>(*ep, "component", line_no));
    if (!component) throw ParseError("unknown endpoint component", line_no);
    s.endpoint.component = *component;
    s.endpoint.framework = Require<std::string>(*ep, "framework", line_no);
    s.endpoint.method = Require<std::string>(*ep, "method", line_no);
    s.op = Require<std::string>(js, "op", line_no);
    auto req = js.find("req");
    auto resp = js.find("resp");
    if (req == js.end() || resp == js.end()) throw ParseError("missing req/resp", line_no);
    s.req = PayloadFromJson(*req, line_no, "req");
    s.resp = PayloadFromJson(*resp, line_no, "resp");
    try {
      s.status = SpanStatus::Parse(Require<std::string>(js, "status", line_no));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    s.start_us = Require<std::uint64_t>(js, "start_us", line_no);
    s.dur_us = Require<std::uint64_t>(js, "dur_us", line_no);
    t.spans.push_back(std::move(s));
  }
  return t;
}

void WriteCorpus(std::ostream& out, const Corpus& corpus) {
  out << kCorpusMagic << ' ' << kCorpusVersion << " seed=" << corpus.metadata.seed
      << " topology=" << corpus.metadata.topology_digest << '\n';
  for (const Trace& t : corpus.traces) out << TraceToJsonLine(t) << '\n';
}

Corpus ReadCorpus(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing corpus header", 1);
  auto header = SplitWhitespace(line);
  if (header.empty() || header[0] != kCorpusMagic) throw ParseError("not a corpus file", 1);
  if (header.size() < 2 || header[1] != kCorpusVersion) {
    throw VersionError("incompatible corpus version '" + (header.size() > 1 ? header[1] : "") +
                       "', expected " + std::string(kCorpusVersion));
  }
  Corpus corpus;
  bool have_seed = false;
  bool have_topology = false;
  for (std::size_t i = 2; i < header.size(); ++i) {
    const std::string& tok = header[i];
    if (tok.rfind("seed=", 0) == 0) {
      try {
        std::size_t used = 0;
        corpus.metadata.seed = std::stoull(tok.substr(5), &used);
        have_seed = used == tok.size() - 5;
      } catch (const std::exception&) {
      }
    } else if (tok.rfind("topology=", 0) == 0) {
      corpus.metadata.topology_digest = tok.substr(9);
      have_topology = !corpus.metadata.topology_digest.empty();
    }
  }
  if (!have_seed || !have_topology) throw ParseError("header needs seed= and topology=", 1);

  std::set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    Trace t = TraceFromJsonLine(line, line_no);
    if (!ids.insert(t.trace_id).second) {
      throw ParseError("duplicate trace_id " + t.trace_id, line_no);
    }
    corpus.traces.push_back(std::move(t));
  }
  corpus.RefreshWindow();
  return corpus;
}

void SaveCorpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  WriteCorpus(out, corpus);
  if (!out) throw IoError("write failed for " + path);
}

Corpus LoadCorpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return ReadCorpus(in);
}

}  // namespace resilitest
