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

// Sandbox-side tooling: the Bash hook that turns every submitted command line
// into a Syslog message, and trace replay that stands in for a live trainee.

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/net.hpp"
#include "cmdtrace/record.hpp"
#include "cmdtrace/sender.hpp"
#include "cmdtrace/syslog_frame.hpp"

namespace cmdtrace {

enum class AgentErrorKind { invalid_config, malformed_json, non_monotonic_timestamps, mixed_sandboxes, io };

class AgentError : public std::runtime_error {
public:
    AgentError(AgentErrorKind kind, const std::string& message, std::size_t line_no = 0);
    [[nodiscard]] AgentErrorKind kind() const noexcept { return kind_; }
    /// 1-based line number for trace errors, 0 otherwise.
    [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }

private:
    AgentErrorKind kind_;
    std::size_t line_no_;
};

struct HookConfig {
    std::string sandbox_id;
    net::Endpoint destination;
    net::Transport transport = net::Transport::udp;
    int facility_priority = kDefaultPri;
    std::string source_ip;  // the host's management address, written as src="..."
    std::string app_name{kDefaultAppName};
};

/// Message layout the hook emits; placeholders are filled per command.
inline constexpr std::string_view kHookMessageTemplate =
    R"({timestamp} username="{username}" {hostname} src="{ip}" wd="{wd}" cmd="{cmd}" cmd_type="bash-command" sid="{sid}")";

/// Substitutes `{name}` placeholders. Values are inserted verbatim; callers
/// escape quoted values themselves (see quote_value).
std::string fill_hook_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Bash snippet for ~/.bashrc or /etc/profile.d. Throws AgentError(invalid_config).
std::string emit_hook_snippet(const HookConfig& config);

struct Trace {
    std::vector<CommandRecord> records;
};

struct TraceOptions {
    bool allow_unsorted = false;  // stable-sort instead of rejecting regressions
    bool allow_multi_sandbox = false;
};

Trace load_trace(const std::filesystem::path& path, const TraceOptions& options = {});
Trace parse_trace(std::istream& in, const TraceOptions& options = {});
void write_trace(std::ostream& out, const Trace& trace);

struct ReplayOptions {
    SenderOptions sender;
    FrameOptions frame;
    /// Original gaps are divided by this; infinity sends back-to-back.
    double speed = std::numeric_limits<double>::infinity();
    /// Called after each record with its trace index and outcome.
    std::function<void(std::size_t, const SendResult&)> on_result;
    const std::atomic<bool>* cancel = nullptr;
};

struct ReplayFailure {
    std::size_t index = 0;
    std::string error;
};

struct ReplayReport {
    std::size_t sent = 0;
    std::size_t failed = 0;
    std::chrono::nanoseconds wall_time{0};
    double speedup = 0.0;  // trace span / wall time
    std::vector<ReplayFailure> failures;
};

ReplayReport replay_trace(const Trace& trace, const ReplayOptions& options);

}  // namespace cmdtrace
