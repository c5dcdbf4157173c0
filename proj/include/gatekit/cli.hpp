// Copyright 2026 The gatekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GATEKIT__CLI_HPP_
#define GATEKIT__CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace gatekit
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// `args` excludes the program name. Subcommands: gen, features, train, eval,
/// ablate, report.
int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err);

}  // namespace gatekit

#endif  // GATEKIT__CLI_HPP_
