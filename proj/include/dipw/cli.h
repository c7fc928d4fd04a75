/*
 * Copyright 2026 The DIPW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: simulate | fit | evaluate | uplift.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#ifndef DIPW_CLI_H_
#define DIPW_CLI_H_

#include <iosfwd>

namespace dipw {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and runs the chosen subcommand. Messages go to `out` and
// `err`.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace dipw

#endif  // DIPW_CLI_H_
