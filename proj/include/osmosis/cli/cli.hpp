/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osmosis::cli {

/// Exit statuses of the `od` command.
enum ExitCode : int { kOk = 0, kUsage = 2, kMissingArtifact = 3, kRuntime = 4 };

/// Runs `od` with `args` (without the program name). Summaries go to `out` as key=value lines,
/// errors to `err`.
int od_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace osmosis::cli
