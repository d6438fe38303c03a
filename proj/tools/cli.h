// Copyright 2026 The DGT Authors. All Rights Reserved.
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

#ifndef DGT_TOOLS_CLI_H_
#define DGT_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace dgt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitPartial = 2;

inline constexpr const char* kVersion = "1.0.0";

// Runs one invocation; args[0] is the program name. Returns the exit code:
// 0 on success, 2 when some rows failed, 1 (or the parser's code) otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dgt::cli

#endif  // DGT_TOOLS_CLI_H_
