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

#include "cmdtrace/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "text_util.hpp"

namespace cmdtrace {

namespace {

// Escapes text for inclusion inside a double-quoted shell string.
std::string shell_dq_literal(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\' || c == '$' || c == '`') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string shell_sq(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

// Shell expression producing each placeholder at hook time.
const std::map<std::string, std::string, std::less<>>& hook_expressions() {
    static const std::map<std::string, std::string, std::less<>> exprs = {
        {"timestamp", "$(date '+%b %d %Y %-H:%M:%S')"},
        {"username", "${__ct_u}"},
        {"hostname", "${__ct_h}"},
        {"wd", "${__ct_w}"},
        {"cmd", "${__ct_c}"},
    };
    return exprs;
}

}  // namespace

AgentError::AgentError(AgentErrorKind kind, const std::string& message, std::size_t line_no)
    : std::runtime_error(line_no == 0 ? message : "line " + std::to_string(line_no) + ": " + message),
      kind_(kind),
      line_no_(line_no) {}

std::string fill_hook_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                const auto name = tmpl.substr(i + 1, close - i - 1);
                if (auto it = values.find(name); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string emit_hook_snippet(const HookConfig& config) {
    if (!is_valid_sandbox_id(config.sandbox_id)) {
        throw AgentError(AgentErrorKind::invalid_config, "sandbox id must match [A-Za-z0-9_-]+");
    }
    if (config.destination.host.empty() || config.destination.port == 0) {
        throw AgentError(AgentErrorKind::invalid_config, "syslog destination must be HOST:PORT");
    }
    if (config.facility_priority < 0 || config.facility_priority > 191) {
        throw AgentError(AgentErrorKind::invalid_config,
                         "PRI " + std::to_string(config.facility_priority) + " outside 0..191");
    }
    if (!is_valid_ipv4_text(config.source_ip)) {
        throw AgentError(AgentErrorKind::invalid_config, "source ip must be an IPv4 dotted quad");
    }
    if (config.app_name.empty() || config.app_name.find_first_of(" '\"") != std::string::npos) {
        throw AgentError(AgentErrorKind::invalid_config, "bad app name");
    }

    // Literal template text is escaped for the double-quoted shell string;
    // placeholders become shell expressions, or literals for static fields.
    auto values = hook_expressions();
    values["ip"] = shell_dq_literal(config.source_ip);
    values["sid"] = shell_dq_literal(config.sandbox_id);
    std::string message;
    {
        std::size_t i = 0;
        const auto tmpl = kHookMessageTemplate;
        while (i < tmpl.size()) {
            const auto open = tmpl.find('{', i);
            const auto close = open == std::string_view::npos ? open : tmpl.find('}', open);
            if (open == std::string_view::npos || close == std::string_view::npos) {
                message += shell_dq_literal(tmpl.substr(i));
                break;
            }
            message += shell_dq_literal(tmpl.substr(i, open - i));
            message += values.at(std::string(tmpl.substr(open + 1, close - open - 1)));
            i = close + 1;
        }
    }

    const auto& dest = config.destination;
    std::string logger = "logger -p " + std::to_string(config.facility_priority) + " -t " + config.app_name;
    switch (config.transport) {
        case net::Transport::udp:
            logger += " --rfc5424 -d -n " + shell_sq(dest.host) + " -P " + std::to_string(dest.port);
            break;
        case net::Transport::tcp:
            logger += " --rfc5424 -T --octet-count -n " + shell_sq(dest.host) + " -P " + std::to_string(dest.port);
            break;
        case net::Transport::tcp_tls:
            // logger has no TLS client; the local rsyslogd forwards (see below).
            break;
    }

    std::ostringstream out;
    out << "# cmdtrace command hook: sandbox " << config.sandbox_id << " -> " << dest.to_string() << " ("
        << net::to_string(config.transport) << ")\n";
    out << "# PS0 is expanded after a command line is read and before it runs.\n";
    out << "__cmdtrace_log() {\n";
    out << "    local __ct_c __ct_w __ct_u __ct_h\n";
    out << "    __ct_c=$(HISTTIMEFORMAT= builtin history 1 | sed -e 's/^[ ]*[0-9]*[* ]*//')\n";
    out << "    [ -n \"$__ct_c\" ] || return 0\n";
    out << "    __ct_c=${__ct_c//\\\\/\\\\\\\\}\n";
    out << "    __ct_c=${__ct_c//\\\"/\\\\\\\"}\n";
    out << "    __ct_w=${PWD//\\\\/\\\\\\\\}\n";
    out << "    __ct_w=${__ct_w//\\\"/\\\\\\\"}\n";
    out << "    __ct_u=$(id -un)\n";
    out << "    __ct_u=${__ct_u//\\\"/\\\\\\\"}\n";
    out << "    __ct_h=$(hostname)\n";
    out << "    " << logger << " -- \"" << message << "\" >/dev/null 2>&1\n";
    out << "}\n";
    out << "PS0='$(__cmdtrace_log)'\"${PS0}\"\n";
    if (config.transport == net::Transport::tcp_tls) {
        out << "# rsyslog forwarding (place in /etc/rsyslog.d/60-cmdtrace.conf):\n";
        out << "#   global(DefaultNetstreamDriver=\"gtls\" DefaultNetstreamDriverCAFile=\"/etc/cmdtrace/ca.pem\")\n";
        out << "#   if $programname == '" << config.app_name
            << "' then action(type=\"omfwd\" protocol=\"tcp\" target=\"" << dest.host << "\" port=\"" << dest.port
            << "\" StreamDriver=\"gtls\" StreamDriverMode=\"1\" TCP_Framing=\"octet-counted\""
            << " template=\"RSYSLOG_SyslogProtocol23Format\")\n";
    }
    return out.str();
}

Trace parse_trace(std::istream& in, const TraceOptions& options) {
    Trace trace;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::size_t> line_of;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            trace.records.push_back(parse_canonical_json(line));
        } catch (const ParseError& e) {
            throw AgentError(AgentErrorKind::malformed_json, e.what(), line_no);
        }
        line_of.push_back(line_no);
    }
    if (!options.allow_multi_sandbox) {
        for (std::size_t i = 1; i < trace.records.size(); ++i) {
            if (trace.records[i].sandbox_id != trace.records[0].sandbox_id) {
                throw AgentError(AgentErrorKind::mixed_sandboxes,
                                 "record for sandbox '" + trace.records[i].sandbox_id + "' in a trace of sandbox '" +
                                     trace.records[0].sandbox_id + "'",
                                 line_of[i]);
            }
        }
    }
    for (std::size_t i = 1; i < trace.records.size(); ++i) {
        if (trace.records[i].timestamp.instant < trace.records[i - 1].timestamp.instant) {
            if (!options.allow_unsorted) {
                throw AgentError(AgentErrorKind::non_monotonic_timestamps, "timestamp earlier than previous record",
                                 line_of[i]);
            }
            std::stable_sort(trace.records.begin(), trace.records.end(), [](const auto& a, const auto& b) {
                return a.timestamp.instant < b.timestamp.instant;
            });
            break;
        }
    }
    return trace;
}

Trace load_trace(const std::filesystem::path& path, const TraceOptions& options) {
    std::ifstream in(path);
    if (!in) throw AgentError(AgentErrorKind::io, "cannot open trace " + path.string());
    return parse_trace(in, options);
}

void write_trace(std::ostream& out, const Trace& trace) {
    for (const auto& r : trace.records) out << to_canonical_json(r) << '\n';
}

ReplayReport replay_trace(const Trace& trace, const ReplayOptions& options) {
    if (!(options.speed > 0.0)) throw AgentError(AgentErrorKind::invalid_config, "speed must be positive");
    ReplayReport report;
    const auto started = std::chrono::steady_clock::now();
    if (trace.records.empty()) {
        report.speedup = std::numeric_limits<double>::infinity();
        return report;
    }
    FrameSender sender(options.sender);
    const auto first = trace.records.front().timestamp.instant;
    const bool paced = std::isfinite(options.speed);

    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& record = trace.records[i];
        if (paced) {
            const double offset_us = static_cast<double>((record.timestamp.instant - first).count()) / options.speed;
            const auto due = started + std::chrono::microseconds(static_cast<std::int64_t>(std::llround(offset_us)));
            std::this_thread::sleep_until(due);
        }
        SendResult result;
        if (options.cancel != nullptr && options.cancel->load()) {
            result.status = SendStatus::cancelled;
            result.error = "cancelled";
        } else {
            result = sender.send(frame_record(record, options.frame), options.cancel);
        }
        if (result.status == SendStatus::delivered) {
            ++report.sent;
        } else {
            ++report.failed;
            report.failures.push_back({i, result.error.empty() ? "cancelled" : result.error});
        }
        if (options.on_result) options.on_result(i, result);
    }

    report.wall_time = std::chrono::steady_clock::now() - started;
    const auto span_s =
        std::chrono::duration<double>(trace.records.back().timestamp.instant - trace.records.front().timestamp.instant)
            .count();
    const auto wall_s = std::chrono::duration<double>(report.wall_time).count();
    report.speedup = wall_s > 0.0 ? span_s / wall_s : std::numeric_limits<double>::infinity();
    return report;
}

}  // namespace cmdtrace
