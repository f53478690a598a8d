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

// CommandRecord and its two text encodings:
//
//   local line  Jul 03 2020 8:09:25 username="root" attacker src="10.1.135.83"
//               wd="/home" cmd="nmap --help" cmd_type="bash-command" sid="1"
//
//   canonical   {"timestamp":"2020-07-03T08:09:25+01:00","username":"root",
//               "hostname":"attacker","ip":"10.1.135.83","wd":"/home",
//               "cmd":"nmap --help","cmd_type":"bash-command","sandbox_id":"1"}
//
// The local line carries no UTC offset; the parser attaches the offset the
// collector is configured with. Quoted values escape `"` as `\"` and `\` as
// `\\`; no other escapes exist.

#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmdtrace/timestamp.hpp"

namespace cmdtrace {

enum class CommandType { bash, msf };

std::string_view to_string(CommandType type);
std::optional<CommandType> parse_command_type(std::string_view text);

struct CommandRecord {
    Timestamp timestamp;
    std::string username;
    std::string hostname;
    std::string ip;
    std::string wd;
    std::string cmd;
    CommandType cmd_type = CommandType::bash;
    std::string sandbox_id;

    friend bool operator==(const CommandRecord&, const CommandRecord&) = default;
};

enum class ParseErrorKind {
    malformed_line,
    malformed_json,
    missing_field,
    bad_timestamp,
    invalid_field,
};

std::string_view to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::string message, std::size_t offset = 0, std::string field = {});

    [[nodiscard]] ParseErrorKind kind() const noexcept { return kind_; }
    /// Byte offset of the first violation (local-line parsing only).
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    /// Offending field name for missing_field / invalid_field.
    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    ParseErrorKind kind_;
    std::size_t offset_;
    std::string field_;
};

/// Field-level checks shared by every decoder. Returns the name of the first
/// invalid field together with a reason, or nullopt when the record is valid.
struct FieldViolation {
    std::string field;
    std::string reason;
};
std::optional<FieldViolation> validate(const CommandRecord& record);

bool is_valid_sandbox_id(std::string_view id);
bool is_valid_ipv4_text(std::string_view text);

CommandRecord parse_local_line(std::string_view line, std::chrono::minutes zone_offset);
std::string render_local_line(const CommandRecord& record);

/// Parses only the `username="..." host src="..." ... sid="..."` tail of a
/// local line; the timestamp comes from elsewhere (a Syslog envelope).
CommandRecord parse_local_fields(std::string_view fields, const Timestamp& timestamp);

std::string to_canonical_json(const CommandRecord& record);
CommandRecord parse_canonical_json(std::string_view text);

/// Quotes a value for the local-line grammar (surrounding quotes included).
std::string quote_value(std::string_view value);

}  // namespace cmdtrace
