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


#include "resilitest/topology.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "resilitest/common.hpp"
#include "resilitest/fault_catalog.hpp"

namespace resilitest {

namespace {

constexpr std::string_view kOnErrorNames[] = {"propagate", "catch_and_degrade", "ignore"};
constexpr std::string_view kBugNames[] = {"missing_timeout", "fire_and_forget", "no_rollback",
                                          "no_retry", "swallow_then_succeed"};

std::string DurationText(std::uint64_t us) {
  if (us % 1'000 == 0) return std::to_string(us / 1'000) + "ms";
  return std::to_string(us) + "us";
}

bool IsPlatform(Component c) {
  return c == Component::kDatabase || c == Component::kCache || c == Component::kMQ;
}

std::uint32_t ParseCount(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    unsigned long v = std::stoul(text, &used);
    if (used != text.size() || v > 1'000'000) throw std::out_of_range("count");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw ParseError("bad count '" + text + "'", line);
  }
}

Step ParseStep(const std::vector<std::string>& f, std::size_t line) {
  if (f.size() < 4) throw ParseError("step needs component, framework and method", line);
  Step s;
  s.line = line;
  auto c = ParseComponent(f[1]);
  if (!c) throw ParseError("unknown component '" + f[1] + "'", line);
  s.endpoint = {*c, f[2], f[3]};
  bool explicit_timeout = false;
  for (std::size_t i = 4; i < f.size(); ++i) {
    const std::string& a = f[i];
    if (a == "async") {
      s.async = true;
      continue;
    }
    auto eq = a.find('=');
    if (eq == std::string::npos) throw ParseError("unknown step attribute '" + a + "'", line);
    std::string key = a.substr(0, eq), value = a.substr(eq + 1);
    if (value.empty()) throw ParseError("empty value for '" + key + "'", line);
    if (key == "to") {
      auto parts = Split(value, ':');
      if (parts.size() != 3) throw ParseError("to= needs <service>:<METHOD>:<uri>", line);
      s.target_service = parts[0];
      s.target_method = parts[1];
      s.target_uri = parts[2];
    } else if (key == "res") {
      s.resource = value;
    } else if (key == "timeout") {
      explicit_timeout = true;
      if (value != "none") {
        try {
          s.timeout_us = ParseDurationUs(value);
        } catch (const ParseError& e) {
          throw ParseError(e.what(), line);
        }
      }
    } else if (key == "retries") {
      s.retries = ParseCount(value, line);
    } else if (key == "on_error") {
      bool found = false;
      for (int k = 0; k < 3; ++k) {
        if (kOnErrorNames[k] == value) {
          s.on_error = static_cast<OnError>(k);
          found = true;
        }
      }
      if (!found) throw ParseError("unknown on_error '" + value + "'", line);
    } else if (key == "bug") {
      s.bug = ParseBugFlag(value);
      if (!s.bug) throw ParseError("unknown bug flag '" + value + "'", line);
    } else if (key == "produces") {
      s.produces = value;
    } else if (key == "uses") {
      s.uses = value;
    } else if (key == "mirror") {
      s.mirror = value;
    } else {
      throw ParseError("unknown step attribute '" + key + "'", line);
    }
  }
  if (!explicit_timeout) s.timeout_us = DefaultTimeoutUs(s.endpoint.component);
  if (s.IsCall()) {
    if (s.target_service.empty()) throw ParseError("call step needs to=", line);
  } else {
    if (s.resource.empty()) throw ParseError("platform step needs res=", line);
    if (!s.target_service.empty()) throw ParseError("to= is only valid on RPC/HTTP steps", line);
  }
  if (!s.mirror.empty() && s.endpoint.component != Component::kCache) {
    throw ParseError("mirror= is only valid on Cache steps", line);
  }
  return s;
}

void WriteStep(std::ostream& out, const Step& s) {
  out << "    step " << ComponentName(s.endpoint.component) << ' ' << s.endpoint.framework << ' '
      << s.endpoint.method;
  if (s.IsCall()) out << " to=" << s.target_service << ':' << s.target_method << ':' << s.target_uri;
  if (!s.resource.empty()) out << " res=" << s.resource;
  out << " timeout=" << (s.timeout_us ? DurationText(*s.timeout_us) : std::string("none"));
  if (s.retries) out << " retries=" << s.retries;
  if (s.on_error != OnError::kPropagate) out << " on_error=" << OnErrorName(s.on_error);
  if (s.async) out << " async";
  if (s.bug) out << " bug=" << BugFlagName(*s.bug);
  if (!s.produces.empty()) out << " produces=" << s.produces;
  if (!s.uses.empty()) out << " uses=" << s.uses;
  if (!s.mirror.empty()) out << " mirror=" << s.mirror;
  out << '\n';
}

std::vector<std::string_view> Segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  if (!path.empty() && path.front() == '/') pos = 1;
  while (pos <= path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    out.push_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

bool IsParam(std::string_view seg) {
  return seg.size() >= 2 && seg.front() == '{' && seg.back() == '}';
}

}  // namespace

std::string_view OnErrorName(OnError e) { return kOnErrorNames[static_cast<int>(e)]; }
std::string_view BugFlagName(BugFlag b) { return kBugNames[static_cast<int>(b)]; }

std::optional<BugFlag> ParseBugFlag(std::string_view text) {
  for (int i = 0; i < 5; ++i) {
    if (kBugNames[i] == text) return static_cast<BugFlag>(i);
  }
  return std::nullopt;
}

std::uint64_t DefaultTimeoutUs(Component c) {
  switch (c) {
    case Component::kRPC:
    case Component::kHTTP:
      return 1'000'000;
    case Component::kDatabase:
    case Component::kMQ:
      return 500'000;
    case Component::kCache:
      return 200'000;
  }
  return 1'000'000;
}

std::string Step::Op() const {
  if (IsCall()) return endpoint.method + " " + target_method + " " + target_uri;
  return endpoint.method + " " + resource;
}

std::set<BugFlag> ServiceSpec::BugFlags() const {
  std::set<BugFlag> out;
  for (const auto& i : interfaces) {
    for (const auto& s : i.workflow) {
      if (s.bug) out.insert(*s.bug);
    }
  }
  return out;
}

const ServiceSpec* TopologySpec::FindService(std::string_view name) const {
  for (const auto& s : services) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const InterfaceSpec* TopologySpec::FindInterface(std::string_view service, std::string_view method,
                                                 std::string_view uri_template) const {
  const ServiceSpec* s = FindService(service);
  if (!s) return nullptr;
  for (const auto& i : s->interfaces) {
    if (i.method == method && i.uri_template == uri_template) return &i;
  }
  return nullptr;
}

std::vector<SeededBug> TopologySpec::Bugs() const {
  std::vector<SeededBug> out;
  std::set<std::string> seen;
  for (const auto& svc : services) {
    for (const auto& i : svc.interfaces) {
      for (const auto& s : i.workflow) {
        if (!s.bug) continue;
        SeededBug b{svc.name + "/" + std::string(BugFlagName(*s.bug)) + "/" + s.endpoint.ToString(),
                    svc.name, *s.bug, s.endpoint, s.Op()};
        if (seen.insert(b.id).second) out.push_back(std::move(b));
      }
    }
  }
  return out;
}

bool TopologySpec::IsAsync(const std::string& service, const Endpoint& endpoint,
                           const std::string& op) const {
  const ServiceSpec* svc = FindService(service);
  if (!svc) return false;
  for (const auto& i : svc->interfaces) {
    for (const auto& s : i.workflow) {
      if (s.async && s.endpoint == endpoint && s.Op() == op) return true;
    }
  }
  return false;
}

TopologySpec TopologySpec::WithoutBugs() const {
  TopologySpec out = *this;
  for (auto& svc : out.services) {
    for (auto& i : svc.interfaces) {
      for (auto& s : i.workflow) {
        if (!s.bug) continue;
        switch (*s.bug) {
          case BugFlag::kMissingTimeout:
            s.timeout_us = 1'000'000;
            break;
          case BugFlag::kFireAndForget:
          case BugFlag::kSwallowThenSucceed:
            s.async = false;
            s.on_error = OnError::kPropagate;
            break;
          case BugFlag::kNoRollback:
          case BugFlag::kNoRetry:
            break;
        }
        s.bug.reset();
      }
    }
  }
  return out;
}

std::string TopologySpec::Digest() const {
  std::ostringstream out;
  WriteTopology(out, *this);
  return HexDigest(out.str());
}

std::size_t TopologySpec::InterfaceCount() const {
  std::size_t n = 0;
  for (const auto& s : services) n += s.interfaces.size();
  return n;
}

bool UriMatches(std::string_view uri_template, std::string_view uri) {
  auto t = Segments(uri_template);
  auto u = Segments(uri);
  if (t.size() != u.size()) return false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (IsParam(t[i])) {
      if (u[i].empty()) return false;
    } else if (t[i] != u[i]) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> UriParams(std::string_view uri_template, std::string_view uri) {
  auto t = Segments(uri_template);
  auto u = Segments(uri);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < t.size() && i < u.size(); ++i) {
    if (IsParam(t[i])) out.emplace_back(u[i]);
  }
  return out;
}

TopologySpec ParseTopology(std::istream& in) {
  TopologySpec spec;
  ServiceSpec* service = nullptr;
  InterfaceSpec* iface = nullptr;
  std::string raw;
  std::size_t line = 0;
  bool seen_header = false;
  while (std::getline(in, raw)) {
    ++line;
    auto t = Trim(raw);
    if (t.empty() || t.front() == '#') continue;
    auto f = SplitWhitespace(t);
    const std::string& kw = f[0];
    if (kw == "topology") {
      if (seen_header || !spec.services.empty() || !spec.components.empty()) {
        throw ParseError("topology header must come first", line);
      }
      seen_header = true;
      if (f.size() < 2) throw ParseError("topology needs a name", line);
      spec.name = f[1];
      for (std::size_t i = 2; i < f.size(); ++i) {
        if (f[i].rfind("seed=", 0) != 0) throw ParseError("unknown topology attribute", line);
        try {
          spec.seed = std::stoull(f[i].substr(5));
        } catch (const std::exception&) {
          throw ParseError("bad seed", line);
        }
      }
    } else if (kw == "component") {
      if (service) throw ParseError("component declarations belong before services", line);
      if (f.size() != 3) throw ParseError("component needs kind and framework", line);
      auto c = ParseComponent(f[1]);
      if (!c || !IsPlatform(*c)) throw ParseError("component kind must be Database, Cache or MQ", line);
      spec.components.push_back({*c, f[2]});
    } else if (kw == "service") {
      if (iface) throw ParseError("service inside an open interface", line);
      if (service) throw ParseError("service inside an open service", line);
      if (f.size() < 2) throw ParseError("service needs a name", line);
      spec.services.push_back({});
      service = &spec.services.back();
      service->name = f[1];
      service->line = line;
      for (std::size_t i = 2; i < f.size(); ++i) {
        if (f[i].rfind("workers=", 0) != 0) throw ParseError("unknown service attribute", line);
        service->workers = ParseCount(f[i].substr(8), line);
      }
    } else if (kw == "interface") {
      if (!service) throw ParseError("interface outside a service", line);
      if (iface) throw ParseError("nested interface", line);
      if (f.size() < 3) throw ParseError("interface needs method and uri", line);
      service->interfaces.push_back({});
      iface = &service->interfaces.back();
      iface->method = f[1];
      iface->uri_template = f[2];
      iface->line = line;
      for (std::size_t i = 3; i < f.size(); ++i) {
        if (f[i].rfind("fields=", 0) == 0) {
          for (const auto& field : Split(f[i].substr(7), ',')) {
            if (field == "session") iface->session = true;
            else if (field == "ts") iface->ts = true;
            else if (field == "idem") iface->idem = true;
            else if (field == "sign") iface->sign = true;
            else throw ParseError("unknown entry field '" + field + "'", line);
          }
        } else if (f[i].rfind("static=", 0) == 0) {
          for (const auto& kv : Split(f[i].substr(7), ',')) {
            auto colon = kv.find(':');
            if (colon == std::string::npos || colon == 0) throw ParseError("static= needs k:v pairs", line);
            iface->statics[kv.substr(0, colon)] = kv.substr(colon + 1);
          }
        } else {
          throw ParseError("unknown interface attribute '" + f[i] + "'", line);
        }
      }
    } else if (kw == "step") {
      if (!iface) throw ParseError("step outside an interface", line);
      iface->workflow.push_back(ParseStep(f, line));
    } else if (kw == "end") {
      if (iface) {
        iface = nullptr;
      } else if (service) {
        service = nullptr;
      } else {
        throw ParseError("unmatched end", line);
      }
    } else {
      throw ParseError("unknown keyword '" + kw + "'", line);
    }
  }
  if (iface || service) throw ParseError("unterminated block at end of file", line);
  ValidateTopology(spec);
  return spec;
}

TopologySpec LoadTopology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ParseTopology(in);
}

void WriteTopology(std::ostream& out, const TopologySpec& spec) {
  out << "topology " << spec.name << " seed=" << spec.seed << '\n';
  for (const auto& c : spec.components) {
    out << "component " << ComponentName(c.component) << ' ' << c.framework << '\n';
  }
  for (const auto& svc : spec.services) {
    out << "service " << svc.name << " workers=" << svc.workers << '\n';
    for (const auto& i : svc.interfaces) {
      out << "  interface " << i.method << ' ' << i.uri_template;
      std::vector<std::string> fields;
      if (i.session) fields.push_back("session");
      if (i.ts) fields.push_back("ts");
      if (i.idem) fields.push_back("idem");
      if (i.sign) fields.push_back("sign");
      if (!fields.empty()) {
        out << " fields=";
        for (std::size_t k = 0; k < fields.size(); ++k) out << (k ? "," : "") << fields[k];
      }
      if (!i.statics.empty()) {
        out << " static=";
        bool first = true;
        for (const auto& [k, v] : i.statics) {
          out << (first ? "" : ",") << k << ':' << v;
          first = false;
        }
      }
      out << '\n';
      for (const auto& s : i.workflow) WriteStep(out, s);
      out << "  end\n";
    }
    out << "end\n";
  }
}

void ValidateTopology(const TopologySpec& spec) {
  auto fail = [](std::size_t line, const std::string& what) {
    throw ValidationError("line " + std::to_string(line) + ": " + what);
  };
  std::set<std::string> names;
  std::set<std::string> request_lines;
  std::set<ComponentDecl> declared(spec.components.begin(), spec.components.end());
  for (const auto& svc : spec.services) {
    if (!names.insert(svc.name).second) fail(svc.line, "duplicate service '" + svc.name + "'");
    if (svc.workers == 0) fail(svc.line, "service '" + svc.name + "' needs at least one worker");
  }
  for (const auto& svc : spec.services) {
    for (const auto& i : svc.interfaces) {
      if (i.uri_template.empty() || i.uri_template.front() != '/') {
        fail(i.line, "uri must start with '/'");
      }
      if (!request_lines.insert(i.RequestLine()).second) {
        fail(i.line, "duplicate interface '" + i.RequestLine() + "'");
      }
      std::set<std::string> produced;
      for (const auto& s : i.workflow) {
        if (!s.endpoint.Valid()) fail(s.line, "step endpoint fields must be non-empty");
        if (s.IsCall()) {
          if (!spec.FindService(s.target_service)) {
            fail(s.line, "call to undeclared service '" + s.target_service + "'");
          }
          if (!spec.FindInterface(s.target_service, s.target_method, s.target_uri)) {
            fail(s.line, "call to undeclared interface '" + s.target_method + " " + s.target_uri +
                             "' of '" + s.target_service + "'");
          }
        } else if (!declared.count({s.endpoint.component, s.endpoint.framework})) {
          fail(s.line, "undeclared component " + std::string(ComponentName(s.endpoint.component)) +
                           "/" + s.endpoint.framework);
        }
        if (s.async && s.on_error == OnError::kPropagate) {
          fail(s.line, "async steps must use on_error=ignore or catch_and_degrade");
        }
        if (s.bug == BugFlag::kMissingTimeout && s.timeout_us) {
          fail(s.line, "missing_timeout steps must not declare a timeout");
        }
        if (s.bug == BugFlag::kFireAndForget && !s.async) {
          fail(s.line, "fire_and_forget steps must be async");
        }
        if (!s.uses.empty() && !produced.count(s.uses)) {
          fail(s.line, "uses= token '" + s.uses + "' is not produced earlier in the workflow");
        }
        if (!s.produces.empty()) produced.insert(s.produces);
      }
    }
  }
  // Interface-level call graph must be acyclic, otherwise replay deadlocks.
  std::map<const InterfaceSpec*, int> state;
  std::function<void(const InterfaceSpec*)> visit = [&](const InterfaceSpec* i) {
    state[i] = 1;
    for (const auto& s : i->workflow) {
      if (!s.IsCall()) continue;
      const InterfaceSpec* callee = spec.FindInterface(s.target_service, s.target_method, s.target_uri);
      if (state[callee] == 1) fail(s.line, "call cycle through '" + callee->RequestLine() + "'");
      if (state[callee] == 0) visit(callee);
    }
    state[i] = 2;
  };
  for (const auto& svc : spec.services) {
    for (const auto& i : svc.interfaces) {
      if (state[&i] == 0) visit(&i);
    }
  }
}

}  // namespace resilitest
