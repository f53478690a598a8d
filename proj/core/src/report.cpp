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

#include "cmdtrace/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json_codec.hpp"

namespace cmdtrace {

namespace {

using detail::ojson;

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::string mss(double seconds) { return format_minutes_seconds(std::llround(seconds)); }

std::int64_t offset_s(const Timestamp& start, const Timestamp& at) {
    return at.epoch_seconds_floor() - start.epoch_seconds_floor();
}

void counts_row(std::ostringstream& out, const char* label, const std::optional<Summary>& s) {
    if (!s) {
        out << fmt("%-12s %8s %8s %8s %8s %8s %8s\n", label, "-", "-", "-", "-", "-", "-");
        return;
    }
    out << fmt("%-12s %8.0f %8.0f %8.0f %8.1f %8.2f %8.2f\n", label, s->total, s->min, s->max, s->median, s->mean,
               s->stdev);
}

void stats_text(std::ostringstream& out, const CohortReport& r) {
    out << "Commands per session (" << r.stats.sessions.size() << " sessions)\n";
    out << fmt("%-12s %8s %8s %8s %8s %8s %8s\n", "Type", "Total", "Min", "Max", "Median", "Avg", "Stdev");
    counts_row(out, "Bash", r.stats.bash);
    counts_row(out, "Metasploit", r.stats.msf);
    counts_row(out, "Both", r.stats.both);
    out << '\n';
}

void gaps_text(std::ostringstream& out, const CohortReport& r) {
    out << "Time per session [m:ss] (" << r.gaps.sessions.size() << " sessions)\n";
    out << fmt("%-12s %8s %8s %8s %8s %8s\n", "", "Min", "Max", "Median", "Avg", "Stdev");
    if (r.gaps.duration) {
        const auto& d = *r.gaps.duration;
        out << fmt("%-12s %8s %8s %8s %8s %8s\n", "Game time", mss(d.min).c_str(), mss(d.max).c_str(),
                   mss(d.median).c_str(), mss(d.mean).c_str(), mss(d.stdev).c_str());
    } else {
        out << fmt("%-12s %8s %8s %8s %8s %8s\n", "Game time", "-", "-", "-", "-", "-");
    }
    if (r.gaps.gap) {
        const auto& g = *r.gaps.gap;
        out << fmt("%-12s %8s %8s %8s %8s %8s\n", "Gap", mss(g.min).c_str(), mss(g.max).c_str(),
                   mss(g.median).c_str(), mss(g.mean).c_str(), mss(g.stdev).c_str());
    } else {
        out << fmt("%-12s %8s %8s %8s %8s %8s\n", "Gap", "-", "-", "-", "-", "-");
    }
    for (const auto& s : r.gaps.sessions) {
        out << "sandbox " << s.sandbox_id << "  commands " << s.commands << "  duration "
            << format_minutes_seconds(s.duration_s) << "  gaps";
        for (auto g : s.gaps) out << ' ' << g;
        out << '\n';
    }
    if (r.correlation) {
        const auto& c = *r.correlation;
        out << "Spearman game time vs commands: n " << c.n;
        out << (c.rho ? fmt("  rho %.4f", *c.rho) : std::string("  rho n/a"));
        out << (c.p_value ? fmt("  p %.4f", *c.p_value) : std::string("  p n/a"));
        out << "  (" << to_string(c.method) << ")\n";
    } else {
        out << "Spearman game time vs commands: n/a (fewer than 3 sessions)\n";
    }
    out << '\n';
}

void freq_text(std::ostringstream& out, const CohortReport& r) {
    out << "Tool frequency (" << r.tools.size() << " tools)\n";
    for (const auto& t : r.tools) out << fmt("%-20s %8llu\n", t.tool.c_str(), static_cast<unsigned long long>(t.count));
    out << '\n';
}

void first_text(std::ostringstream& out, const CohortReport& r) {
    out << "First actions (" << r.first_actions.size() << " sessions)\n";
    out << fmt("%-12s %-12s %-12s %s\n", "Sandbox", "Class", "Tool", "Target");
    for (const auto& f : r.first_actions) {
        const char* target = !f.target_correct ? "-" : (*f.target_correct ? "yes" : "no");
        out << fmt("%-12s %-12s %-12s %s\n", f.sandbox_id.c_str(), std::string(to_string(f.cls)).c_str(),
                   f.matched_tool.value_or("-").c_str(), target);
    }
    out << '\n';
}

void findings_text(std::ostringstream& out, const CohortReport& r) {
    out << "Findings (" << r.findings.size() << ")\n";
    for (const auto& f : r.findings) {
        out << fmt("%-12s %6llu  %-25s %-20s %-8s ", f.sandbox_id.c_str(), static_cast<unsigned long long>(f.seq),
                   format_iso8601(f.timestamp).c_str(), std::string(to_string(f.rule_id)).c_str(),
                   std::string(to_string(f.severity)).c_str())
            << f.evidence << "  # " << f.explanation << '\n';
    }
    out << '\n';
}

void progress_text(std::ostringstream& out, const CohortReport& r) {
    out << "Progress (" << r.progress.size() << " sessions)\n";
    for (const auto& [sid, g] : r.progress) {
        const auto count = [&](StepStatus st) {
            return std::count_if(g.nodes.begin(), g.nodes.end(), [&](const StepNode& n) { return n.status == st; });
        };
        out << "sandbox " << sid << "  achieved " << count(StepStatus::achieved) << '/' << g.nodes.size()
            << "  omitted " << count(StepStatus::omitted) << "  errors " << g.errors.size() << '\n';
        const auto start = r.session_start.find(sid);
        for (const auto& n : g.nodes) {
            out << "  " << fmt("%-16s ", n.step_id.c_str()) << to_string(n.status);
            if (n.achieved_at && start != r.session_start.end()) {
                out << fmt("  %8s  ", format_minutes_seconds(offset_s(start->second, *n.achieved_at)).c_str())
                    << n.achieved_by;
            }
            out << '\n';
        }
    }
    out << '\n';
}

ojson first_action_json(const FirstAction& f) {
    ojson first = ojson::array();
    for (const auto& c : f.first) first.push_back(c.cmd);
    return ojson{{"sandbox_id", f.sandbox_id},
                 {"class", to_string(f.cls)},
                 {"matched_tool", f.matched_tool ? ojson(*f.matched_tool) : ojson(nullptr)},
                 {"target_correct", f.target_correct ? ojson(*f.target_correct) : ojson(nullptr)},
                 {"first_commands", first}};
}

}  // namespace

std::string_view to_string(ReportSection section) {
    switch (section) {
        case ReportSection::stats: return "stats";
        case ReportSection::gaps: return "gaps";
        case ReportSection::first: return "first";
        case ReportSection::freq: return "freq";
        case ReportSection::findings: return "findings";
        case ReportSection::progress: return "progress";
    }
    return "stats";
}

std::optional<ReportSection> parse_report_section(std::string_view text) {
    for (auto s : kAllSections) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

CohortReport build_report(const SessionMap& sessions, const ScenarioSpec& scenario) {
    CohortReport r;
    r.stats = session_stats(sessions);
    r.gaps = cohort_gaps(sessions);
    if (r.gaps.sessions.size() >= 3) {
        std::vector<double> duration;
        std::vector<double> commands;
        for (const auto& s : r.gaps.sessions) {
            duration.push_back(static_cast<double>(s.duration_s));
            commands.push_back(static_cast<double>(s.commands));
        }
        r.correlation = spearman(duration, commands);
    }
    std::vector<CommandRecord> all;
    const auto fa_options = scenario.first_action_options();
    for (const auto& [sid, records] : sessions) {
        all.insert(all.end(), records.begin(), records.end());
        if (records.empty()) continue;
        r.session_start[sid] =
            std::min_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
                return a.timestamp.instant < b.timestamp.instant;
            })->timestamp;
        auto fa = first_action(records, fa_options);
        fa.sandbox_id = sid;
        r.first_actions.push_back(std::move(fa));
        auto analysis = analyze_session(records, scenario);
        std::stable_sort(analysis.findings.begin(), analysis.findings.end(),
                         [](const Finding& a, const Finding& b) { return a.seq < b.seq; });
        r.findings.insert(r.findings.end(), analysis.findings.begin(), analysis.findings.end());
        if (!scenario.steps.empty()) r.progress.emplace(sid, std::move(analysis.graph));
    }
    r.tools = tool_frequency(all);
    return r;
}

std::string render_json(const CohortReport& r, const std::set<ReportSection>& sections) {
    ojson doc = ojson::object();
    if (sections.contains(ReportSection::stats)) {
        ojson rows = ojson::array();
        for (const auto& s : r.stats.sessions) {
            rows.push_back({{"sandbox_id", s.sandbox_id}, {"bash", s.bash}, {"msf", s.msf}, {"total", s.total}});
        }
        doc["commands"] = {{"sessions", rows},
                           {"bash", detail::summary_json(r.stats.bash)},
                           {"msf", detail::summary_json(r.stats.msf)},
                           {"both", detail::summary_json(r.stats.both)}};
    }
    if (sections.contains(ReportSection::gaps)) {
        ojson rows = ojson::array();
        for (const auto& s : r.gaps.sessions) {
            rows.push_back({{"sandbox_id", s.sandbox_id},
                            {"commands", s.commands},
                            {"duration_s", s.duration_s},
                            {"gaps", s.gaps},
                            {"gap_summary", detail::summary_json(s.gap_summary)}});
        }
        ojson gap = nullptr;
        if (r.gaps.gap) {
            const auto& g = *r.gaps.gap;
            gap = {{"sessions", g.sessions}, {"min", g.min},   {"max", g.max},
                   {"median", g.median},     {"avg", g.mean},  {"stdev", g.stdev}};
        }
        ojson corr = nullptr;
        if (r.correlation) {
            const auto& c = *r.correlation;
            corr = {{"n", c.n},
                    {"rho", c.rho ? ojson(*c.rho) : ojson(nullptr)},
                    {"p_value", c.p_value ? ojson(*c.p_value) : ojson(nullptr)},
                    {"method", to_string(c.method)}};
        }
        doc["time"] = {{"sessions", rows},
                       {"game_time", detail::summary_json(r.gaps.duration)},
                       {"gap", gap},
                       {"correlation", corr}};
    }
    if (sections.contains(ReportSection::freq)) {
        ojson tools = ojson::array();
        for (const auto& t : r.tools) tools.push_back({{"tool", t.tool}, {"count", t.count}});
        doc["tools"] = tools;
    }
    if (sections.contains(ReportSection::first)) {
        ojson rows = ojson::array();
        for (const auto& f : r.first_actions) rows.push_back(first_action_json(f));
        doc["first_actions"] = rows;
    }
    if (sections.contains(ReportSection::findings)) {
        ojson rows = ojson::array();
        for (const auto& f : r.findings) rows.push_back(detail::finding_json(f));
        doc["findings"] = rows;
    }
    if (sections.contains(ReportSection::progress)) {
        ojson rows = ojson::array();
        for (const auto& [sid, g] : r.progress) rows.push_back(detail::progress_json(sid, g));
        doc["progress"] = rows;
    }
    return doc.dump(2) + "\n";
}

std::string render_text(const CohortReport& r, const std::set<ReportSection>& sections) {
    std::ostringstream out;
    if (sections.contains(ReportSection::stats)) stats_text(out, r);
    if (sections.contains(ReportSection::gaps)) gaps_text(out, r);
    if (sections.contains(ReportSection::freq)) freq_text(out, r);
    if (sections.contains(ReportSection::first)) first_text(out, r);
    if (sections.contains(ReportSection::findings)) findings_text(out, r);
    if (sections.contains(ReportSection::progress)) progress_text(out, r);
    return out.str();
}

std::string findings_jsonl(const std::vector<Finding>& findings) {
    std::string out;
    for (const auto& f : findings) out += detail::dump(detail::finding_json(f)) + "\n";
    return out;
}

}  // namespace cmdtrace
