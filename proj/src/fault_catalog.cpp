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

#include "resilitest/fault_catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "resilitest/common.hpp"

namespace resilitest {

namespace {

// Kept in sync with assets/catalog.txt (checked by a unit test).
constexpr std::string_view kBuiltInCatalog = R"(# Default application-level fault library.
# <id> <category> <Component>/<framework>/<method> <effect> [args]
cache-command-timeout platform_exception Cache/*/* throw RedisCommandTimeoutException
cache-connection platform_exception Cache/*/* throw RedisConnectionException
cache-latency comm_latency Cache/*/* delay auto
db-connection platform_exception Database/*/* throw CannotGetJdbcConnectionException
db-latency comm_latency Database/*/* delay auto
db-sql-timeout platform_exception Database/*/* throw SQLTimeoutException
http-401 comm_manipulated_response HTTP/*/* status 401 body=unauthorized
http-500 comm_manipulated_response HTTP/*/* status 500 body=internal-server-error
http-504 comm_manipulated_response HTTP/*/* status 504 body=gateway-timeout
http-latency comm_latency HTTP/*/* delay auto
http-socket-timeout comm_protocol_error HTTP/*/* throw java.net.SocketTimeoutException
mq-disconnect platform_exception MQ/*/* throw DisconnectException
mq-serialization platform_exception MQ/*/* throw SerializationException
mq-timeout platform_exception MQ/*/* throw TimeoutException
rpc-latency comm_latency RPC/*/* delay auto
rpc-timeout comm_protocol_error RPC/*/* throw RpcTimeoutException
rpc-unavailable comm_manipulated_response RPC/*/* status 503 body=unavailable
)";

constexpr std::string_view kCategoryNames[] = {"platform_exception", "comm_latency",
                                               "comm_protocol_error", "comm_manipulated_response"};

bool EffectFitsCategory(FaultCategory c, FaultEffect::Kind k) {
  switch (c) {
    case FaultCategory::kPlatformException:
    case FaultCategory::kCommProtocolError:
      return k == FaultEffect::Kind::kThrow;
    case FaultCategory::kCommLatency:
      return k == FaultEffect::Kind::kDelay;
    case FaultCategory::kCommManipulatedResponse:
      return k == FaultEffect::Kind::kStatus;
  }
  return false;
}

std::string FormatDuration(std::uint64_t us) {
  if (us % 1'000'000 == 0) return std::to_string(us / 1'000'000) + "s";
  if (us % 1'000 == 0) return std::to_string(us / 1'000) + "ms";
  return std::to_string(us) + "us";
}

}  // namespace

std::string_view CategoryName(FaultCategory c) { return kCategoryNames[static_cast<int>(c)]; }

std::optional<FaultCategory> ParseCategory(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (kCategoryNames[i] == text) return static_cast<FaultCategory>(i);
  }
  return std::nullopt;
}

bool EndpointMatcher::Matches(const Endpoint& endpoint) const {
  return endpoint.component == component && (!framework || *framework == endpoint.framework) &&
         (!method || *method == endpoint.method);
}

std::string EndpointMatcher::ToString() const {
  return std::string(ComponentName(component)) + "/" + framework.value_or("*") + "/" +
         method.value_or("*");
}

std::uint64_t ParseDurationUs(std::string_view text) {
  std::uint64_t scale = 0;
  std::string_view digits;
  if (text.size() > 2 && text.substr(text.size() - 2) == "us") {
    scale = 1;
    digits = text.substr(0, text.size() - 2);
  } else if (text.size() > 2 && text.substr(text.size() - 2) == "ms") {
    scale = 1'000;
    digits = text.substr(0, text.size() - 2);
  } else if (text.size() > 1 && text.back() == 's') {
    scale = 1'000'000;
    digits = text.substr(0, text.size() - 1);
  } else {
    throw ParseError("duration '" + std::string(text) + "' needs a us/ms/s suffix", 0);
  }
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw ParseError("bad duration '" + std::string(text) + "'", 0);
  }
  return value * scale;
}

std::uint64_t EffectiveDelayUs(const FaultEffect& effect, std::optional<std::uint64_t> timeout_us) {
  if (effect.delay_us) return *effect.delay_us;
  return timeout_us ? 2 * *timeout_us : kDefaultDelayUs;
}

std::string FaultSpec::ToLine() const {
  std::string s = fault_id + " " + std::string(CategoryName(category)) + " " + applies_to.ToString();
  switch (effect.kind) {
    case FaultEffect::Kind::kThrow:
      s += " throw " + effect.exception;
      break;
    case FaultEffect::Kind::kDelay:
      s += " delay " + (effect.delay_us ? FormatDuration(*effect.delay_us) : std::string("auto"));
      break;
    case FaultEffect::Kind::kStatus:
      s += " status " + std::to_string(effect.status_code);
      if (effect.body) s += " body=" + *effect.body;
      break;
  }
  return s;
}

FaultSpec ParseFaultLine(std::string_view line) {
  auto f = SplitWhitespace(line);
  if (f.size() < 5) throw ParseError("fault record needs id, category, matcher and effect", 0);
  FaultSpec spec;
  spec.fault_id = f[0];
  auto category = ParseCategory(f[1]);
  if (!category) throw ParseError("unknown fault category '" + f[1] + "'", 0);
  spec.category = *category;

  auto m = Split(f[2], '/');
  if (m.size() != 3 || m[0].empty() || m[1].empty() || m[2].empty()) {
    throw ParseError("matcher must be Component/framework/method", 0);
  }
  auto component = ParseComponent(m[0]);
  if (!component) throw ParseError("unknown component '" + m[0] + "'", 0);
  spec.applies_to.component = *component;
  if (m[1] != "*") spec.applies_to.framework = m[1];
  if (m[2] != "*") spec.applies_to.method = m[2];

  const std::string& effect = f[3];
  if (effect == "throw") {
    if (f.size() != 5) throw ParseError("throw takes exactly one exception name", 0);
    spec.effect.kind = FaultEffect::Kind::kThrow;
    spec.effect.exception = f[4];
  } else if (effect == "delay") {
    if (f.size() != 5) throw ParseError("delay takes exactly one duration", 0);
    spec.effect.kind = FaultEffect::Kind::kDelay;
    if (f[4] != "auto") spec.effect.delay_us = ParseDurationUs(f[4]);
  } else if (effect == "status") {
    spec.effect.kind = FaultEffect::Kind::kStatus;
    try {
      std::size_t used = 0;
      spec.effect.status_code = std::stoi(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad status code '" + f[4] + "'", 0);
    }
    for (std::size_t i = 5; i < f.size(); ++i) {
      if (f[i].rfind("body=", 0) != 0) throw ParseError("unknown status argument '" + f[i] + "'", 0);
      spec.effect.body = f[i].substr(5);
    }
  } else {
    throw ParseError("unknown fault effect '" + effect + "'", 0);
  }
  if (!EffectFitsCategory(spec.category, spec.effect.kind)) {
    throw ParseError("effect '" + effect + "' does not fit category '" + f[1] + "'", 0);
  }
  return spec;
}

FaultCatalog::FaultCatalog(std::vector<FaultSpec> faults) : faults_(std::move(faults)) {
  std::sort(faults_.begin(), faults_.end(),
            [](const FaultSpec& a, const FaultSpec& b) { return a.fault_id < b.fault_id; });
  for (std::size_t i = 1; i < faults_.size(); ++i) {
    if (faults_[i].fault_id == faults_[i - 1].fault_id) {
      throw ValidationError("duplicate fault id '" + faults_[i].fault_id + "'");
    }
  }
}

FaultCatalog FaultCatalog::Parse(std::istream& in) {
  std::vector<FaultSpec> faults;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    FaultSpec spec;
    try {
      spec = ParseFaultLine(t);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!ids.insert(spec.fault_id).second) {
      throw ParseError("duplicate fault id '" + spec.fault_id + "'", line_no);
    }
    faults.push_back(std::move(spec));
  }
  return FaultCatalog(std::move(faults));
}

FaultCatalog FaultCatalog::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return Parse(in);
}

std::string_view FaultCatalog::BuiltInText() { return kBuiltInCatalog; }

FaultCatalog FaultCatalog::BuiltIn() {
  std::istringstream in{std::string(kBuiltInCatalog)};
  return Parse(in);
}

std::vector<const FaultSpec*> FaultCatalog::FaultsFor(const Endpoint& endpoint) const {
  std::vector<const FaultSpec*> out;
  for (const auto& f : faults_) {
    if (f.applies_to.Matches(endpoint)) out.push_back(&f);
  }
  return out;
}

const FaultSpec* FaultCatalog::Find(std::string_view fault_id) const {
  auto it = std::lower_bound(faults_.begin(), faults_.end(), fault_id,
                             [](const FaultSpec& f, std::string_view id) { return f.fault_id < id; });
  return it != faults_.end() && it->fault_id == fault_id ? &*it : nullptr;
}

}  // namespace resilitest
