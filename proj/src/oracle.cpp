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

#include "resilitest/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace resilitest {

void Thresholds::Validate() const {
  if (!(0.0 <= inject_max_success && inject_max_success < recover_min_success &&
        recover_min_success <= startup_min_success && startup_min_success <= 1.0)) {
    throw ValidationError(fmt::format(
        "thresholds must satisfy 0 <= inject_max < recover_min <= startup_min <= 1 "
        "(got startup_min={} inject_max={} recover_min={})",
        startup_min_success, inject_max_success, recover_min_success));
  }
}

OracleCriteria::OracleCriteria(Thresholds defaults) : defaults_(defaults) { defaults_.Validate(); }

const Thresholds& OracleCriteria::For(const std::string& interface_id) const {
  auto it = overrides_.find(interface_id);
  return it == overrides_.end() ? defaults_ : it->second;
}

void OracleCriteria::Set(const std::string& interface_id, const Thresholds& t) {
  t.Validate();
  overrides_[interface_id] = t;
}

namespace {

void ApplyKeyValues(Thresholds& t, const std::vector<std::string>& words, std::size_t first,
                    std::size_t line_no) {
  for (std::size_t i = first; i < words.size(); ++i) {
    auto eq = words[i].find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + words[i] + "'", line_no);
    std::string key = words[i].substr(0, eq);
    std::string text = words[i].substr(eq + 1);
    double value = 0;
    try {
      std::size_t used = 0;
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::logic_error&) {
      throw ParseError("bad number '" + text + "'", line_no);
    }
    if (key == "startup_min") {
      t.startup_min_success = value;
    } else if (key == "inject_max") {
      t.inject_max_success = value;
    } else if (key == "recover_min") {
      t.recover_min_success = value;
    } else {
      throw ParseError("unknown criteria key '" + key + "'", line_no);
    }
  }
  try {
    t.Validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line_no);
  }
}

}  // namespace

OracleCriteria OracleCriteria::Parse(std::istream& in, OracleCriteria base) {
  OracleCriteria out = std::move(base);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto words = SplitWhitespace(line);
    if (words.empty()) continue;
    if (words[0] == "default") {
      ApplyKeyValues(out.defaults_, words, 1, line_no);
    } else if (words[0] == "interface") {
      if (words.size() < 2) throw ParseError("interface line needs an id", line_no);
      Thresholds t = out.For(words[1]);
      ApplyKeyValues(t, words, 2, line_no);
      out.overrides_[words[1]] = t;
    } else {
      throw ParseError("unknown criteria directive '" + words[0] + "'", line_no);
    }
  }
  return out;
}

OracleCriteria OracleCriteria::Load(const std::string& path, OracleCriteria base) {
  std::istringstream in(ReadFile(path));
  return Parse(in, std::move(base));
}

void OracleCriteria::Write(std::ostream& out) const {
  auto line = [](const Thresholds& t) {
    return fmt::format("startup_min={} inject_max={} recover_min={}", FormatFixed(t.startup_min_success),
                       FormatFixed(t.inject_max_success), FormatFixed(t.recover_min_success));
  };
  out << "default " << line(defaults_) << "\n";
  for (const auto& [id, t] : overrides_) out << "interface " << id << " " << line(t) << "\n";
}

OracleCriteria DeriveCriteria(const std::map<std::string, double>& healthy_success,
                              const Thresholds& defaults, double margin) {
  OracleCriteria criteria(defaults);
  for (const auto& [id, rate] : healthy_success) {
    Thresholds t = defaults;
    double derived = std::min(defaults.recover_min_success, rate - margin);
    if (derived <= defaults.inject_max_success) {
      derived = std::min(defaults.recover_min_success, defaults.inject_max_success + margin);
    }
    if (derived == defaults.recover_min_success) continue;
    t.recover_min_success = derived;
    criteria.Set(id, t);
  }
  return criteria;
}

namespace {

double RateOf(const std::optional<PhaseMetrics>& phase, const char* name) {
  if (!phase) throw ValidationError(std::string("missing ") + name + " phase");
  if (!phase->entry.success_rate) throw ValidationError(std::string(name) + " phase has no samples");
  return *phase->entry.success_rate;
}

}  // namespace

Verdict Evaluate(const RunMetrics& m, const Thresholds& c, bool entry_only) {
  double startup = RateOf(m.startup, "startup");
  double inject = RateOf(m.injection, "injection");
  double recover = RateOf(m.recovery, "recovery");
  if (startup < c.startup_min_success) return Verdict::kStartupFailure;
  if (entry_only) {
    return recover < c.recover_min_success ? Verdict::kFailNoRecovery : Verdict::kPass;
  }
  if (m.injection->injection_hits == 0) return Verdict::kFailNoImpact;
  if (inject > c.inject_max_success && m.injection->endpoint_failures > 0 &&
      !m.injection->downstream_ok) {
    return Verdict::kFailSilent;
  }
  if (recover < c.recover_min_success || m.recovery->endpoint_failures > 0) {
    return Verdict::kFailNoRecovery;
  }
  return Verdict::kPass;
}

}  // namespace resilitest
