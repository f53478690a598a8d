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

#include "cmdtrace/timestamp.hpp"

#include <cstdio>
#include <stdexcept>

#include "text_util.hpp"

namespace cmdtrace {

using namespace std::chrono;

std::int64_t Timestamp::epoch_seconds_floor() const {
    return floor<seconds>(instant).time_since_epoch().count();
}

CivilTime to_civil(const Timestamp& ts) {
    const auto local = ts.instant + ts.offset;
    const auto day = floor<days>(local);
    const year_month_day ymd{day};
    auto rest = local - day;
    CivilTime c;
    c.year = static_cast<int>(ymd.year());
    c.month = static_cast<unsigned>(ymd.month());
    c.day = static_cast<unsigned>(ymd.day());
    const auto h = duration_cast<hours>(rest);
    rest -= h;
    const auto m = duration_cast<minutes>(rest);
    rest -= m;
    const auto s = duration_cast<seconds>(rest);
    rest -= s;
    c.hour = static_cast<unsigned>(h.count());
    c.minute = static_cast<unsigned>(m.count());
    c.second = static_cast<unsigned>(s.count());
    c.micros = static_cast<std::uint32_t>(rest.count());
    return c;
}

Timestamp from_civil(const CivilTime& c, minutes offset) {
    const year_month_day ymd{year{c.year}, month{c.month}, day{c.day}};
    if (!ymd.ok() || c.hour > 23 || c.minute > 59 || c.second > 59 || c.micros > 999'999) {
        throw std::invalid_argument("invalid calendar time");
    }
    const auto local = sys_days{ymd} + hours{c.hour} + minutes{c.minute} + seconds{c.second} +
                       Micros{c.micros};
    return Timestamp{Instant{local - offset}, offset};
}

std::string format_utc_offset(minutes offset) {
    const auto total = offset.count();
    const char sign = total < 0 ? '-' : '+';
    const auto abs = total < 0 ? -total : total;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%c%02lld:%02lld", sign, static_cast<long long>(abs / 60),
                  static_cast<long long>(abs % 60));
    return buf;
}

std::optional<minutes> parse_utc_offset(std::string_view text) {
    if (text == "Z" || text == "z" || text == "UTC") return minutes{0};
    if (text.size() != 6 || (text[0] != '+' && text[0] != '-') || text[3] != ':') return std::nullopt;
    const auto hh = detail::parse_fixed_digits(text.substr(1, 2));
    const auto mm = detail::parse_fixed_digits(text.substr(4, 2));
    if (!hh || !mm || *hh > 23 || *mm > 59) return std::nullopt;
    const auto value = minutes{*hh * 60 + *mm};
    return text[0] == '-' ? -value : value;
}

std::string format_iso8601(const Timestamp& ts) {
    const auto c = to_civil(ts);
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02u", c.year, c.month, c.day,
                          c.hour, c.minute, c.second);
    std::string out(buf, static_cast<std::size_t>(n));
    if (c.micros != 0) {
        std::snprintf(buf, sizeof buf, ".%06u", c.micros);
        out += buf;
    }
    out += format_utc_offset(ts.offset);
    return out;
}

std::optional<Timestamp> parse_iso8601(std::string_view t) {
    // 2020-07-03T08:09:25
    if (t.size() < 20) return std::nullopt;
    if (t[4] != '-' || t[7] != '-' || (t[10] != 'T' && t[10] != 't') || t[13] != ':' || t[16] != ':') {
        return std::nullopt;
    }
    const auto y = detail::parse_fixed_digits(t.substr(0, 4));
    const auto mo = detail::parse_fixed_digits(t.substr(5, 2));
    const auto d = detail::parse_fixed_digits(t.substr(8, 2));
    const auto h = detail::parse_fixed_digits(t.substr(11, 2));
    const auto mi = detail::parse_fixed_digits(t.substr(14, 2));
    const auto s = detail::parse_fixed_digits(t.substr(17, 2));
    if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
    std::size_t pos = 19;
    std::uint32_t micros = 0;
    if (pos < t.size() && t[pos] == '.') {
        ++pos;
        const auto start = pos;
        while (pos < t.size() && detail::is_digit(t[pos])) ++pos;
        const auto frac = t.substr(start, pos - start);
        if (frac.empty() || frac.size() > 6) return std::nullopt;
        micros = detail::fraction_to_micros(frac);
    }
    const auto offset = parse_utc_offset(t.substr(pos));
    if (!offset) return std::nullopt;
    CivilTime c{*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d), static_cast<unsigned>(*h),
                static_cast<unsigned>(*mi), static_cast<unsigned>(*s), micros};
    try {
        return from_civil(c, *offset);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

std::string format_minutes_seconds(std::int64_t seconds_total) {
    const bool neg = seconds_total < 0;
    const auto abs = neg ? -seconds_total : seconds_total;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%lld:%02lld", neg ? "-" : "", static_cast<long long>(abs / 60),
                  static_cast<long long>(abs % 60));
    return buf;
}

}  // namespace cmdtrace
