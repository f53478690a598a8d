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

#include "cmdtrace/analytics.hpp"

#include <algorithm>
#include <unordered_map>

#include "cmdtrace/normalize.hpp"

namespace cmdtrace {

namespace {

const std::set<std::string, std::less<>>& orientation_tools() {
    static const std::set<std::string, std::less<>> tools = {"ifconfig", "ip", "ping", "ls", "pwd", "cd", "man"};
    return tools;
}

// Ordinary housekeeping that is neither orientation nor a sign of drifting
// away from the exercise.
const std::set<std::string, std::less<>>& neutral_tools() {
    static const std::set<std::string, std::less<>> tools = {
        "cat",  "less",  "more",     "head",   "tail",  "echo", "clear", "history", "whoami", "id",
        "uname", "hostname", "exit", "logout", "sudo",  "su",   "cp",    "mv",      "mkdir",  "touch",
        "nano", "vim",   "vi",       "grep",   "find",  "file", "which", "whereis", "apropos", "info",
        "help", "date",  "env",      "export", "chmod", "reset"};
    return tools;
}

bool is_help_invocation(const std::vector<std::string>& words) {
    return std::any_of(words.begin() + 1, words.end(),
                       [](const std::string& w) { return w == "--help" || w == "-h" || w == "-help"; });
}

bool names_target(const NormalizedCommand& nc, const FirstActionOptions& options) {
    for (const auto& p : nc.positionals) {
        const auto cidr = Cidr::parse(p);
        if (!cidr) continue;
        for (const auto& t : options.targets) {
            if (cidr->contains(t)) return true;
        }
        for (const auto& r : options.target_ranges) {
            if (cidr->overlaps(r) && cidr->prefix >= r.prefix) return true;
        }
    }
    return false;
}

void sort_by_time(std::vector<CommandRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const CommandRecord& a, const CommandRecord& b) { return a.timestamp.instant < b.timestamp.instant; });
}

std::vector<double> as_doubles(const std::vector<std::uint64_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

std::vector<ToolCount> tool_frequency(const std::vector<CommandRecord>& records) {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& r : records) {
        for (auto& tool : command_tools(r.cmd)) ++counts[std::move(tool)];
    }
    std::vector<ToolCount> out;
    out.reserve(counts.size());
    for (auto& [tool, n] : counts) out.push_back({tool, n});
    std::sort(out.begin(), out.end(), [](const ToolCount& a, const ToolCount& b) {
        return a.count != b.count ? a.count > b.count : a.tool < b.tool;
    });
    return out;
}

SessionStatsTable session_stats(const SessionMap& sessions) {
    SessionStatsTable table;
    std::vector<std::uint64_t> bash;
    std::vector<std::uint64_t> msf;
    std::vector<std::uint64_t> both;
    for (const auto& [id, records] : sessions) {
        SessionCounts c;
        c.sandbox_id = id;
        for (const auto& r : records) {
            if (r.cmd_type == CommandType::bash) {
                ++c.bash;
            } else {
                ++c.msf;
            }
        }
        c.total = c.bash + c.msf;
        bash.push_back(c.bash);
        msf.push_back(c.msf);
        both.push_back(c.total);
        table.sessions.push_back(std::move(c));
    }
    table.bash = describe(as_doubles(bash));
    table.msf = describe(as_doubles(msf));
    table.both = describe(as_doubles(both));
    return table;
}

GapStats gap_series(std::vector<CommandRecord> session) {
    sort_by_time(session);
    GapStats g;
    g.commands = session.size();
    if (session.empty()) return g;
    g.sandbox_id = session.front().sandbox_id;
    std::vector<double> as_double;
    for (std::size_t i = 1; i < session.size(); ++i) {
        const auto gap = session[i].timestamp.epoch_seconds_floor() - session[i - 1].timestamp.epoch_seconds_floor();
        g.gaps.push_back(gap);
        as_double.push_back(static_cast<double>(gap));
    }
    g.duration_s = session.back().timestamp.epoch_seconds_floor() - session.front().timestamp.epoch_seconds_floor();
    g.gap_summary = describe(as_double);
    return g;
}

CohortGapStats cohort_gaps(const SessionMap& sessions) {
    CohortGapStats out;
    std::vector<double> durations;
    CohortGapStats::GapRow row;
    bool any_gap = false;
    for (const auto& [id, records] : sessions) {
        if (records.empty()) continue;
        auto g = gap_series(records);
        durations.push_back(static_cast<double>(g.duration_s));
        if (g.gap_summary) {
            const auto& s = *g.gap_summary;
            row.min = any_gap ? std::min(row.min, s.min) : s.min;
            row.max = any_gap ? std::max(row.max, s.max) : s.max;
            row.median += s.median;
            row.mean += s.mean;
            row.stdev += s.stdev;
            ++row.sessions;
            any_gap = true;
        }
        out.sessions.push_back(std::move(g));
    }
    out.duration = describe(durations);
    if (any_gap) {
        const auto n = static_cast<double>(row.sessions);
        row.median /= n;
        row.mean /= n;
        row.stdev /= n;
        out.gap = row;
    }
    return out;
}

std::string_view to_string(FirstActionClass cls) {
    switch (cls) {
        case FirstActionClass::task_start: return "task-start";
        case FirstActionClass::orientation: return "orientation";
        case FirstActionClass::off_task: return "off-task";
        case FirstActionClass::unknown: return "unknown";
    }
    return "unknown";
}

bool is_orientation_command(std::string_view cmd) {
    const auto segments = split_command_list(cmd);
    if (segments.empty()) return false;
    for (const auto& seg : segments) {
        const auto words = shell_split(seg);
        if (words.empty()) continue;
        const auto tool = command_tools(seg).front();
        if (!orientation_tools().contains(tool) && !is_help_invocation(words)) return false;
    }
    return true;
}

FirstAction first_action(std::vector<CommandRecord> session, const FirstActionOptions& options) {
    sort_by_time(session);
    FirstAction fa;
    if (session.empty()) return fa;
    fa.sandbox_id = session.front().sandbox_id;
    fa.first.assign(session.begin(), session.begin() + static_cast<std::ptrdiff_t>(std::min(options.k, session.size())));
    const bool have_targets = !options.targets.empty() || !options.target_ranges.empty();

    for (const auto& r : fa.first) {
        for (const auto& seg : split_command_list(r.cmd)) {
            const auto nc = normalize(seg);
            if (!options.start_tools.contains(nc.tool)) continue;
            if (!fa.matched_tool) {
                fa.cls = FirstActionClass::task_start;
                fa.matched_tool = nc.tool;
            }
            if (have_targets && names_target(nc, options)) fa.target_correct = true;
        }
    }
    if (fa.cls == FirstActionClass::task_start) {
        if (have_targets && !fa.target_correct) fa.target_correct = false;
        return fa;
    }

    if (std::all_of(fa.first.begin(), fa.first.end(),
                    [](const CommandRecord& r) { return is_orientation_command(r.cmd); })) {
        fa.cls = FirstActionClass::orientation;
        return fa;
    }
    for (const auto& r : fa.first) {
        if (r.cmd_type == CommandType::msf) continue;  // inside the exercise's console
        for (const auto& tool : command_tools(r.cmd)) {
            if (!orientation_tools().contains(tool) && !neutral_tools().contains(tool) &&
                !options.scenario_tools.contains(tool) && !options.start_tools.contains(tool)) {
                fa.cls = FirstActionClass::off_task;
                fa.matched_tool = tool;
                return fa;
            }
        }
    }
    fa.cls = FirstActionClass::unknown;
    return fa;
}

}  // namespace cmdtrace
