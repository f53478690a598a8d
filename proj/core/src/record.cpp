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

#include "cmdtrace/record.hpp"

#include <array>
#include <cstdio>

#include "json.hpp"
#include "text_util.hpp"

namespace cmdtrace {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                      "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

using detail::is_digit;

// Cursor over one local line; every failure reports the byte offset at which
// the grammar stopped matching.
class LineCursor {
public:
    LineCursor(std::string_view text, std::size_t base) : text_(text), base_(base) {}

    [[nodiscard]] std::size_t pos() const { return pos_; }
    [[nodiscard]] std::size_t abs_pos() const { return base_ + pos_; }
    [[nodiscard]] bool at_end() const { return pos_ >= text_.size(); }

    [[noreturn]] void fail(std::string what, std::string field = {}) const {
        if (field.empty() && !context_.empty()) {
            what = "bad " + context_ + ": " + what;
            field = context_;
        }
        throw ParseError(ParseErrorKind::malformed_line, std::move(what), abs_pos(), std::move(field));
    }

    void set_context(std::string field) { context_ = std::move(field); }

    void expect_char(char c, const char* what) {
        if (at_end() || text_[pos_] != c) fail(std::string("expected ") + what);
        ++pos_;
    }

    std::string_view take_while_digits(std::size_t min, std::size_t max, const char* what) {
        const auto start = pos_;
        while (!at_end() && is_digit(text_[pos_]) && pos_ - start < max) ++pos_;
        if (pos_ - start < min) {
            pos_ = start;
            fail(std::string("expected ") + what);
        }
        return text_.substr(start, pos_ - start);
    }

    std::string_view take_token(const char* what) {
        const auto start = pos_;
        while (!at_end() && text_[pos_] != ' ') ++pos_;
        if (pos_ == start) fail(std::string("expected ") + what);
        return text_.substr(start, pos_ - start);
    }

    // ` key="value"` (leading space included unless `first`).
    std::string keyed_value(std::string_view key, bool first = false) {
        const auto start = pos_;
        if (!first) {
            if (at_end()) fail("missing key " + std::string(key), std::string(key));
            expect_char(' ', "space");
        }
        const std::string prefix = std::string(key) + "=\"";
        if (text_.substr(pos_, prefix.size()) != prefix) {
            if (at_end()) fail("missing key " + std::string(key), std::string(key));
            pos_ = first ? start : start + 1;
            fail("expected key " + std::string(key), std::string(key));
        }
        pos_ += prefix.size();
        return quoted_body(key);
    }

    void set_pos(std::size_t p) { pos_ = p; }
    [[nodiscard]] std::string_view rest() const { return text_.substr(pos_); }

private:
    std::string quoted_body(std::string_view key) {
        std::string out;
        while (true) {
            if (at_end()) fail("unbalanced quote in " + std::string(key), std::string(key));
            const char c = text_[pos_];
            if (c == '"') {
                ++pos_;
                return out;
            }
            if (c == '\\') {
                if (pos_ + 1 >= text_.size()) fail("dangling escape in " + std::string(key), std::string(key));
                const char next = text_[pos_ + 1];
                if (next != '"' && next != '\\') fail("unknown escape in " + std::string(key), std::string(key));
                out.push_back(next);
                pos_ += 2;
                continue;
            }
            out.push_back(c);
            ++pos_;
        }
    }

    std::string_view text_;
    std::size_t base_;
    std::size_t pos_ = 0;
    std::string context_;
};

struct FieldOffsets {
    std::size_t username = 0, hostname = 0, ip = 0, wd = 0, cmd = 0, cmd_type = 0, sandbox_id = 0;

    [[nodiscard]] std::size_t of(std::string_view field) const {
        if (field == "username") return username;
        if (field == "hostname") return hostname;
        if (field == "ip") return ip;
        if (field == "wd") return wd;
        if (field == "cmd") return cmd;
        if (field == "cmd_type") return cmd_type;
        return sandbox_id;
    }
};

CommandRecord parse_fields(LineCursor& cur, const Timestamp& ts) {
    CommandRecord r;
    r.timestamp = ts;
    FieldOffsets at;

    at.username = cur.abs_pos();
    r.username = cur.keyed_value("username", true);
    cur.expect_char(' ', "space before hostname");
    at.hostname = cur.abs_pos();
    r.hostname = std::string(cur.take_token("hostname"));
    at.ip = cur.abs_pos();
    r.ip = cur.keyed_value("src");
    at.wd = cur.abs_pos();
    r.wd = cur.keyed_value("wd");
    at.cmd = cur.abs_pos();
    r.cmd = cur.keyed_value("cmd");
    at.cmd_type = cur.abs_pos();
    const auto type_text = cur.keyed_value("cmd_type");
    const auto type = parse_command_type(type_text);
    if (!type) {
        throw ParseError(ParseErrorKind::malformed_line, "unknown cmd_type '" + type_text + "'", at.cmd_type,
                         "cmd_type");
    }
    r.cmd_type = *type;
    at.sandbox_id = cur.abs_pos();
    r.sandbox_id = cur.keyed_value("sid");
    if (!cur.at_end()) cur.fail("trailing characters after sid");

    if (auto bad = validate(r)) {
        throw ParseError(ParseErrorKind::malformed_line, bad->field + ": " + bad->reason, at.of(bad->field),
                         bad->field);
    }
    return r;
}

std::string json_dump(const nlohmann::ordered_json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

std::string_view to_string(CommandType type) {
    return type == CommandType::bash ? "bash-command" : "msf-command";
}

std::optional<CommandType> parse_command_type(std::string_view text) {
    if (text == "bash-command") return CommandType::bash;
    if (text == "msf-command") return CommandType::msf;
    return std::nullopt;
}

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::malformed_line: return "MalformedLine";
        case ParseErrorKind::malformed_json: return "MalformedJson";
        case ParseErrorKind::missing_field: return "MissingField";
        case ParseErrorKind::bad_timestamp: return "BadTimestamp";
        case ParseErrorKind::invalid_field: return "InvalidField";
    }
    return "ParseError";
}

ParseError::ParseError(ParseErrorKind kind, std::string message, std::size_t offset, std::string field)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      offset_(offset),
      field_(std::move(field)) {}

bool is_valid_sandbox_id(std::string_view id) {
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || is_digit(c) || c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

bool is_valid_ipv4_text(std::string_view text) {
    int parts = 0;
    std::size_t i = 0;
    while (true) {
        const auto start = i;
        while (i < text.size() && is_digit(text[i])) ++i;
        const auto len = i - start;
        if (len == 0 || len > 3) return false;
        if (len > 1 && text[start] == '0') return false;
        if (*detail::parse_fixed_digits(text.substr(start, len)) > 255) return false;
        ++parts;
        if (i == text.size()) break;
        if (text[i] != '.' || parts == 4) return false;
        ++i;
    }
    return parts == 4;
}

std::optional<FieldViolation> validate(const CommandRecord& r) {
    if (r.username.empty()) return FieldViolation{"username", "must not be empty"};
    if (r.hostname.empty()) return FieldViolation{"hostname", "must not be empty"};
    for (char c : r.hostname) {
        if (detail::is_space(c) || c == '"') return FieldViolation{"hostname", "must not contain whitespace or quotes"};
    }
    if (!is_valid_ipv4_text(r.ip)) return FieldViolation{"ip", "not an IPv4 dotted quad"};
    if (r.wd.empty() || r.wd.front() != '/') return FieldViolation{"wd", "must be an absolute path"};
    if (r.cmd.empty()) return FieldViolation{"cmd", "must not be empty"};
    if (!is_valid_sandbox_id(r.sandbox_id)) return FieldViolation{"sandbox_id", "must match [A-Za-z0-9_-]+"};
    return std::nullopt;
}

std::string quote_value(std::string_view value) {
    std::string out;
    out.reserve(value.size() + 2);
    out.push_back('"');
    for (char c : value) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

CommandRecord parse_local_line(std::string_view line, std::chrono::minutes zone_offset) {
    LineCursor cur(line, 0);
    const auto month_at = cur.pos();
    const auto month_text = line.substr(0, 3);
    unsigned month = 0;
    for (std::size_t i = 0; i < kMonths.size(); ++i) {
        if (month_text == kMonths[i]) month = static_cast<unsigned>(i + 1);
    }
    if (month == 0) {
        throw ParseError(ParseErrorKind::malformed_line, "bad timestamp: unknown month", month_at, "timestamp");
    }
    cur.set_pos(3);
    cur.set_context("timestamp");
    cur.expect_char(' ', "space after month");
    const auto day = cur.take_while_digits(2, 2, "two-digit day");
    cur.expect_char(' ', "space after day");
    const auto year = cur.take_while_digits(4, 4, "four-digit year");
    cur.expect_char(' ', "space after year");
    const auto hour = cur.take_while_digits(1, 2, "hour");
    cur.expect_char(':', "':' after hour");
    const auto minute = cur.take_while_digits(2, 2, "two-digit minute");
    cur.expect_char(':', "':' after minute");
    const auto second = cur.take_while_digits(2, 2, "two-digit second");
    std::uint32_t micros = 0;
    if (!cur.at_end() && line[cur.pos()] == '.') {
        cur.set_pos(cur.pos() + 1);
        micros = detail::fraction_to_micros(cur.take_while_digits(1, 6, "1-6 fractional digits"));
    }
    CivilTime civil{*detail::parse_fixed_digits(year),
                    month,
                    static_cast<unsigned>(*detail::parse_fixed_digits(day)),
                    static_cast<unsigned>(*detail::parse_fixed_digits(hour)),
                    static_cast<unsigned>(*detail::parse_fixed_digits(minute)),
                    static_cast<unsigned>(*detail::parse_fixed_digits(second)),
                    micros};
    Timestamp ts;
    try {
        ts = from_civil(civil, zone_offset);
    } catch (const std::invalid_argument&) {
        cur.fail("no such date/time");
    }
    cur.expect_char(' ', "space after timestamp");
    cur.set_context({});
    return parse_fields(cur, ts);
}

CommandRecord parse_local_fields(std::string_view fields, const Timestamp& timestamp) {
    LineCursor cur(fields, 0);
    return parse_fields(cur, timestamp);
}

std::string render_local_line(const CommandRecord& r) {
    const auto c = to_civil(r.timestamp);
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%s %02u %04d %u:%02u:%02u", kMonths[c.month - 1].data(), c.day, c.year,
                          c.hour, c.minute, c.second);
    std::string out(buf, static_cast<std::size_t>(n));
    if (c.micros != 0) {
        std::snprintf(buf, sizeof buf, ".%06u", c.micros);
        out += buf;
    }
    out += " username=";
    out += quote_value(r.username);
    out += ' ';
    out += r.hostname;
    out += " src=";
    out += quote_value(r.ip);
    out += " wd=";
    out += quote_value(r.wd);
    out += " cmd=";
    out += quote_value(r.cmd);
    out += " cmd_type=";
    out += quote_value(to_string(r.cmd_type));
    out += " sid=";
    out += quote_value(r.sandbox_id);
    return out;
}

std::string to_canonical_json(const CommandRecord& r) {
    nlohmann::ordered_json j;
    j["timestamp"] = format_iso8601(r.timestamp);
    j["username"] = r.username;
    j["hostname"] = r.hostname;
    j["ip"] = r.ip;
    j["wd"] = r.wd;
    j["cmd"] = r.cmd;
    j["cmd_type"] = std::string(to_string(r.cmd_type));
    j["sandbox_id"] = r.sandbox_id;
    return json_dump(j);
}

CommandRecord parse_canonical_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(ParseErrorKind::malformed_json, e.what());
    }
    if (!j.is_object()) throw ParseError(ParseErrorKind::malformed_json, "expected a JSON object");

    auto field = [&](const char* name) -> std::string {
        auto it = j.find(name);
        if (it == j.end()) throw ParseError(ParseErrorKind::missing_field, name, 0, name);
        if (!it->is_string()) {
            throw ParseError(ParseErrorKind::malformed_json, std::string(name) + " must be a string", 0, name);
        }
        return it->get<std::string>();
    };

    CommandRecord r;
    const auto ts_text = field("timestamp");
    r.username = field("username");
    r.hostname = field("hostname");
    r.ip = field("ip");
    r.wd = field("wd");
    r.cmd = field("cmd");
    const auto type_text = field("cmd_type");
    r.sandbox_id = field("sandbox_id");

    const auto ts = parse_iso8601(ts_text);
    if (!ts) throw ParseError(ParseErrorKind::bad_timestamp, "unparseable timestamp '" + ts_text + "'", 0, "timestamp");
    r.timestamp = *ts;
    const auto type = parse_command_type(type_text);
    if (!type) throw ParseError(ParseErrorKind::invalid_field, "unknown cmd_type '" + type_text + "'", 0, "cmd_type");
    r.cmd_type = *type;
    if (auto bad = validate(r)) {
        throw ParseError(ParseErrorKind::invalid_field, bad->field + ": " + bad->reason, 0, bad->field);
    }
    return r;
}

}  // namespace cmdtrace
