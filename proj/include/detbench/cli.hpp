// Copyright 2026 The detbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace detbench {

/// Seed used when neither --seed nor DETBENCH_SEED is given.
inline constexpr std::uint64_t kDefaultSeed = 42;

enum ExitCode : int { kExitOk = 0, kExitDomainError = 1, kExitUsage = 2 };

/// Runs the detbench command line. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace detbench
