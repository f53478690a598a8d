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

// RFC 5424 envelope around the key=value command payload.
//
//   <134>1 2020-07-03T08:09:25+01:00 attacker cmdlog - - - username="root" ...
//
// Over TCP each frame is octet-counted (`LEN SP FRAME`). When a shared key is
// configured the payload ends with ` mac="<hex HMAC-SHA256 of the payload>"`,
// which ingestion verifies and strips.

#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cmdtrace/record.hpp"

namespace cmdtrace {

inline constexpr int kDefaultPri = 134;  // local0.info
inline constexpr std::string_view kDefaultAppName = "cmdlog";

struct SyslogFrame {
    int pri = kDefaultPri;
    int version = 1;
    std::optional<Timestamp> header_timestamp;  // nullopt for NILVALUE
    std::string header_hostname;                // empty for NILVALUE
    std::string app_name;                       // empty for NILVALUE
    std::string procid;
    std::string msgid;
    std::string structured_data = "-";
    std::string msg;
};

enum class FrameErrorKind { malformed_frame, malformed_payload };

class FrameError : public std::runtime_error {
public:
    FrameError(FrameErrorKind kind, const std::string& message);
    [[nodiscard]] FrameErrorKind kind() const noexcept { return kind_; }

private:
    FrameErrorKind kind_;
};

SyslogFrame parse_syslog_frame(std::string_view bytes);
std::string render_syslog_frame(const SyslogFrame& frame);

struct FrameOptions {
    int pri = kDefaultPri;
    std::string app_name{kDefaultAppName};
    std::optional<std::string> hmac_key;
};

/// Envelope carries the record's exact timestamp and hostname; the payload is
/// the record's local line.
std::string frame_record(const CommandRecord& record, const FrameOptions& options = {});

struct IngestOptions {
    std::chrono::minutes zone_offset{0};
    std::optional<std::string> hmac_key;
};

/// Parses envelope and payload. Envelope timestamp and hostname win over the
/// payload's when both are present.
CommandRecord ingest_frame(std::string_view bytes, const IngestOptions& options = {});

std::string hmac_sha256_hex(std::string_view key, std::string_view data);

}  // namespace cmdtrace
