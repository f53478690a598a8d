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

#include "cmdtrace/syslog_frame.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "text_util.hpp"

namespace cmdtrace {

namespace {

constexpr std::string_view kMacKey = " mac=\"";
constexpr std::size_t kMacHexLen = 64;

[[noreturn]] void bad_frame(const std::string& what) {
    throw FrameError(FrameErrorKind::malformed_frame, what);
}

class HeaderCursor {
public:
    explicit HeaderCursor(std::string_view s) : s_(s) {}

    std::string_view field(const char* name, std::size_t max_len) {
        const auto start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ' ') {
            const auto c = static_cast<unsigned char>(s_[pos_]);
            if (c < 33 || c > 126) bad_frame(std::string("non-printable byte in ") + name);
            ++pos_;
        }
        const auto len = pos_ - start;
        if (len == 0 || len > max_len) bad_frame(std::string("bad ") + name);
        return s_.substr(start, len);
    }

    void space(const char* after) {
        if (pos_ >= s_.size() || s_[pos_] != ' ') bad_frame(std::string("expected space after ") + after);
        ++pos_;
    }

    std::string_view structured_data() {
        if (pos_ < s_.size() && s_[pos_] == '-') {
            ++pos_;
            return "-";
        }
        const auto start = pos_;
        if (pos_ >= s_.size() || s_[pos_] != '[') bad_frame("bad structured data");
        while (pos_ < s_.size() && s_[pos_] == '[') {
            ++pos_;
            bool in_quotes = false;
            while (true) {
                if (pos_ >= s_.size()) bad_frame("unterminated structured data element");
                const char c = s_[pos_];
                if (in_quotes && c == '\\') {
                    pos_ += 2;
                    continue;
                }
                if (c == '"') in_quotes = !in_quotes;
                ++pos_;
                if (c == ']' && !in_quotes) break;
            }
        }
        return s_.substr(start, pos_ - start);
    }

    [[nodiscard]] bool at_end() const { return pos_ >= s_.size(); }
    [[nodiscard]] std::string_view rest() const { return s_.substr(pos_); }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

std::string nil_or(std::string_view v) {
    return v == "-" ? std::string() : std::string(v);
}

std::string_view or_nil(const std::string& v) {
    return v.empty() ? std::string_view("-") : std::string_view(v);
}

}  // namespace

FrameError::FrameError(FrameErrorKind kind, const std::string& message)
    : std::runtime_error((kind == FrameErrorKind::malformed_frame ? "MalformedFrame: " : "MalformedPayload: ") +
                         message),
      kind_(kind) {}

SyslogFrame parse_syslog_frame(std::string_view bytes) {
    while (!bytes.empty() && (bytes.back() == '\n' || bytes.back() == '\r' || bytes.back() == '\0')) {
        bytes.remove_suffix(1);
    }
    if (bytes.size() < 4 || bytes[0] != '<') bad_frame("missing PRI");
    const auto close = bytes.find('>');
    if (close == std::string_view::npos || close < 2 || close > 4) bad_frame("bad PRI");
    const auto pri = detail::parse_fixed_digits(bytes.substr(1, close - 1));
    if (!pri || *pri > 191 || (close - 1 > 1 && bytes[1] == '0')) bad_frame("PRI out of range");

    SyslogFrame f;
    f.pri = *pri;
    HeaderCursor cur(bytes.substr(close + 1));
    const auto version = cur.field("VERSION", 3);
    const auto v = detail::parse_fixed_digits(version);
    if (!v || *v == 0 || version[0] == '0') bad_frame("bad VERSION");
    if (*v != 1) bad_frame("unsupported VERSION " + std::string(version));
    f.version = *v;
    cur.space("VERSION");
    const auto ts = cur.field("TIMESTAMP", 64);
    if (ts != "-") {
        f.header_timestamp = parse_iso8601(ts);
        if (!f.header_timestamp) bad_frame("bad TIMESTAMP '" + std::string(ts) + "'");
    }
    cur.space("TIMESTAMP");
    f.header_hostname = nil_or(cur.field("HOSTNAME", 255));
    cur.space("HOSTNAME");
    f.app_name = nil_or(cur.field("APP-NAME", 48));
    cur.space("APP-NAME");
    f.procid = nil_or(cur.field("PROCID", 128));
    cur.space("PROCID");
    f.msgid = nil_or(cur.field("MSGID", 32));
    cur.space("MSGID");
    f.structured_data = std::string(cur.structured_data());
    if (!cur.at_end()) {
        cur.space("STRUCTURED-DATA");
        auto msg = cur.rest();
        if (detail::starts_with(msg, "\xEF\xBB\xBF")) msg.remove_prefix(3);
        f.msg = std::string(msg);
    }
    return f;
}

std::string render_syslog_frame(const SyslogFrame& f) {
    std::string out = "<" + std::to_string(f.pri) + ">" + std::to_string(f.version) + " ";
    out += f.header_timestamp ? format_iso8601(*f.header_timestamp) : "-";
    out += ' ';
    out += or_nil(f.header_hostname);
    out += ' ';
    out += or_nil(f.app_name);
    out += ' ';
    out += or_nil(f.procid);
    out += ' ';
    out += or_nil(f.msgid);
    out += ' ';
    out += f.structured_data.empty() ? "-" : f.structured_data;
    if (!f.msg.empty()) {
        out += ' ';
        out += f.msg;
    }
    return out;
}

std::string hmac_sha256_hex(std::string_view key, std::string_view data) {
    unsigned char mac[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char*>(data.data()),
         data.size(), mac, &len);
    return detail::hex_encode(mac, len);
}

std::string frame_record(const CommandRecord& record, const FrameOptions& options) {
    SyslogFrame f;
    f.pri = options.pri;
    f.header_timestamp = record.timestamp;
    f.header_hostname = record.hostname;
    f.app_name = options.app_name;
    f.msg = render_local_line(record);
    if (options.hmac_key) {
        const auto mac = hmac_sha256_hex(*options.hmac_key, f.msg);
        f.msg += kMacKey;
        f.msg += mac;
        f.msg += '"';
    }
    return render_syslog_frame(f);
}

CommandRecord ingest_frame(std::string_view bytes, const IngestOptions& options) {
    const SyslogFrame frame = parse_syslog_frame(bytes);
    if (frame.msg.empty()) bad_frame("empty MSG");

    std::string_view payload = frame.msg;
    const auto mac_at = payload.rfind(kMacKey);
    const bool has_mac = mac_at != std::string_view::npos &&
                         payload.size() == mac_at + kMacKey.size() + kMacHexLen + 1 && payload.back() == '"';
    if (options.hmac_key) {
        if (!has_mac) throw FrameError(FrameErrorKind::malformed_payload, "missing mac");
        const auto expected = hmac_sha256_hex(*options.hmac_key, payload.substr(0, mac_at));
        const auto given = payload.substr(mac_at + kMacKey.size(), kMacHexLen);
        if (CRYPTO_memcmp(expected.data(), given.data(), kMacHexLen) != 0) {
            throw FrameError(FrameErrorKind::malformed_payload, "mac mismatch");
        }
    }
    if (has_mac) payload = payload.substr(0, mac_at);

    CommandRecord record;
    try {
        if (detail::starts_with(payload, "username=\"")) {
            if (!frame.header_timestamp) bad_frame("payload without timestamp requires envelope TIMESTAMP");
            record = parse_local_fields(payload, *frame.header_timestamp);
        } else {
            record = parse_local_line(payload, options.zone_offset);
        }
    } catch (const ParseError& e) {
        throw FrameError(FrameErrorKind::malformed_payload, e.what());
    }
    if (frame.header_timestamp) record.timestamp = *frame.header_timestamp;
    if (!frame.header_hostname.empty()) record.hostname = frame.header_hostname;
    return record;
}

}  // namespace cmdtrace
