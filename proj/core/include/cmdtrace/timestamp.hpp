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

#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cmdtrace {

using Micros = std::chrono::microseconds;
using Instant = std::chrono::sys_time<Micros>;

/// A point in time together with the UTC offset it was observed in.
///
/// Two timestamps are equal only when both the instant and the offset match,
/// so that serialization round-trips are lossless. Ordering is by instant
/// first; the offset only breaks ties.
struct Timestamp {
    Instant instant{};
    std::chrono::minutes offset{0};

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
    friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
        if (auto c = a.instant <=> b.instant; c != 0) return c;
        return a.offset.count() <=> b.offset.count();
    }

    /// Microseconds since the Unix epoch (UTC).
    [[nodiscard]] std::int64_t epoch_micros() const { return instant.time_since_epoch().count(); }
    /// Whole seconds since the Unix epoch, rounded toward negative infinity.
    [[nodiscard]] std::int64_t epoch_seconds_floor() const;

    static Timestamp from_epoch_micros(std::int64_t micros, std::chrono::minutes offset = {}) {
        return Timestamp{Instant{Micros{micros}}, offset};
    }
};

/// Calendar fields of a timestamp expressed in its own offset.
struct CivilTime {
    int year = 1970;
    unsigned month = 1;  // 1..12
    unsigned day = 1;    // 1..31
    unsigned hour = 0;
    unsigned minute = 0;
    unsigned second = 0;
    std::uint32_t micros = 0;  // 0..999999
};

CivilTime to_civil(const Timestamp& ts);

/// Throws std::invalid_argument when the fields do not name a real date/time.
Timestamp from_civil(const CivilTime& civil, std::chrono::minutes offset);

/// ISO-8601 with numeric offset, e.g. `2020-07-03T08:09:25+01:00`.
/// Fractional seconds are printed with six digits and only when non-zero.
std::string format_iso8601(const Timestamp& ts);

/// Accepts `YYYY-MM-DDTHH:MM:SS[.f{1,6}](Z|+HH:MM|-HH:MM)`.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// `+01:00` style; also accepts `Z` and `UTC` for zero.
std::optional<std::chrono::minutes> parse_utc_offset(std::string_view text);
std::string format_utc_offset(std::chrono::minutes offset);

/// `m:ss` with unbounded minutes (`1169:20`); negative values get a leading `-`.
std::string format_minutes_seconds(std::int64_t seconds);

}  // namespace cmdtrace
