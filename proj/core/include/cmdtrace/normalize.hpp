// Copyright 2026 The cmdtrace Authors
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

// Command normalization: whitespace-insensitive, argument-order-insensitive
// comparison of command lines.
//
//   nmap   -sV  -p 10000 172.18.1.5   ->   nmap -p 10000 -sV 172.18.1.5
//   nmap -p 10000 -sV 172.18.1.5      ->   nmap -p 10000 -sV 172.18.1.5

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/analytics_error.hpp"

namespace cmdtrace {

struct OptionPair {
    std::string flag;
    std::optional<std::string> value;

    friend auto operator<=>(const OptionPair&, const OptionPair&) = default;
};

struct NormalizedCommand {
    std::string tool;
    std::vector<OptionPair> options;  // sorted, duplicates removed
    std::vector<std::string> positionals;
    std::string canonical;

    [[nodiscard]] bool has_flag(std::string_view flag) const;
    /// Value of the first pair with this flag, if it has one.
    [[nodiscard]] std::optional<std::string> value_of(std::string_view flag) const;
};

/// Shell-like word splitting: single quotes are literal, double quotes allow
/// `\"` `\\` `\$` and `` \` `` escapes, a backslash outside quotes escapes the
/// next character. An unterminated quote runs to the end of the input.
std::vector<std::string> shell_split(std::string_view text);

/// Splits a command list at unquoted `;`, `&`, `&&`, `|` and `||`. Segments
/// are trimmed; empty ones are dropped.
std::vector<std::string> split_command_list(std::string_view text);

/// Tool (basename of the first word) of every segment of a command list.
std::vector<std::string> command_tools(std::string_view text);

/// 1 when `flag` takes a separate value for `tool`, else 0. Unknown flags
/// take no value, except that `--x` inherits the arity of a known `-x`.
int option_arity(std::string_view tool, std::string_view flag);

/// Throws AnalyticsError(empty_command) for blank input.
NormalizedCommand normalize(std::string_view cmd);

/// Quotes a word so shell_split yields it back unchanged.
std::string shell_quote(std::string_view word);

}  // namespace cmdtrace
