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

// Session-level analyses over stored records: tool frequencies, per-session
// command counts, time gaps between commands and the first action taken.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/ipv4.hpp"
#include "cmdtrace/record.hpp"
#include "cmdtrace/stats.hpp"

namespace cmdtrace {

/// Records grouped by sandbox id.
using SessionMap = std::map<std::string, std::vector<CommandRecord>>;

struct ToolCount {
    std::string tool;
    std::uint64_t count = 0;

    friend bool operator==(const ToolCount&, const ToolCount&) = default;
};

/// Descending by count, ties broken lexicographically. Every segment of a
/// command list counts (`ls; cd /` is one ls and one cd); blank commands are
/// skipped.
std::vector<ToolCount> tool_frequency(const std::vector<CommandRecord>& records);

struct SessionCounts {
    std::string sandbox_id;
    std::uint64_t bash = 0;
    std::uint64_t msf = 0;
    std::uint64_t total = 0;
};

struct SessionStatsTable {
    std::vector<SessionCounts> sessions;  // by sandbox id
    // Cohort statistics over per-session counts; absent for an empty cohort.
    std::optional<Summary> bash;
    std::optional<Summary> msf;
    std::optional<Summary> both;
};

SessionStatsTable session_stats(const SessionMap& sessions);

struct GapStats {
    std::string sandbox_id;
    std::size_t commands = 0;
    std::int64_t duration_s = 0;
    /// Whole-second differences of successive timestamps, each floored to the
    /// second first, so the gaps always add up to the duration exactly.
    std::vector<std::int64_t> gaps;
    std::optional<Summary> gap_summary;  // absent for fewer than two commands
};

/// Records are ordered by timestamp (stably) before gaps are taken.
GapStats gap_series(std::vector<CommandRecord> session);

struct CohortGapStats {
    std::vector<GapStats> sessions;
    std::optional<Summary> duration;  // over session durations
    // Gap row: min and max over every gap of every session; median, mean and
    // stdev are averages of the per-session median, mean and stdev.
    struct GapRow {
        std::size_t sessions = 0;
        double min = 0.0;
        double max = 0.0;
        double median = 0.0;
        double mean = 0.0;
        double stdev = 0.0;
    };
    std::optional<GapRow> gap;
};

CohortGapStats cohort_gaps(const SessionMap& sessions);

enum class FirstActionClass { task_start, orientation, off_task, unknown };

std::string_view to_string(FirstActionClass cls);

struct FirstActionOptions {
    std::size_t k = 5;
    std::set<std::string, std::less<>> start_tools{"nmap"};
    /// Tools that belong to the exercise; they never count as off-task.
    std::set<std::string, std::less<>> scenario_tools;
    std::vector<Ipv4> targets;
    std::vector<Cidr> target_ranges;
};

struct FirstAction {
    std::string sandbox_id;
    std::vector<CommandRecord> first;
    FirstActionClass cls = FirstActionClass::unknown;
    std::optional<std::string> matched_tool;
    /// For task-start: whether a start-tool command in the window named a
    /// scenario target. Absent when no target set is configured.
    std::optional<bool> target_correct;
};

/// Orientation tools: ifconfig, ip, ping, ls, pwd, cd, man, plus any
/// `--help` / `-h` invocation.
bool is_orientation_command(std::string_view cmd);

FirstAction first_action(std::vector<CommandRecord> session, const FirstActionOptions& options = {});

}  // namespace cmdtrace
