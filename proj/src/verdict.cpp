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


#include "resilitest/verdict.hpp"

namespace resilitest {

namespace {
constexpr std::string_view kNames[] = {"PASS", "FAIL_NO_RECOVERY", "FAIL_SILENT", "FAIL_NO_IMPACT",
                                       "STARTUP_FAILURE"};
}

std::string_view VerdictName(Verdict v) { return kNames[static_cast<int>(v)]; }

std::optional<Verdict> ParseVerdict(std::string_view text) {
  for (int i = 0; i < 5; ++i) {
    if (kNames[i] == text) return static_cast<Verdict>(i);
  }
  return std::nullopt;
}

}  // namespace resilitest
