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

// Cohort report: the command-count and time tables, tool frequencies, first
// actions, findings and per-sandbox progress, as JSON or aligned text.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/analytics.hpp"
#include "cmdtrace/progress.hpp"
#include "cmdtrace/stats.hpp"

namespace cmdtrace {

enum class ReportSection { stats, gaps, first, freq, findings, progress };

std::string_view to_string(ReportSection section);
std::optional<ReportSection> parse_report_section(std::string_view text);

inline const std::set<ReportSection> kAllSections = {ReportSection::stats, ReportSection::gaps,
                                                     ReportSection::first, ReportSection::freq,
                                                     ReportSection::findings, ReportSection::progress};

struct CohortReport {
    SessionStatsTable stats;
    CohortGapStats gaps;
    /// Game time against number of commands; absent below three sessions.
    std::optional<SpearmanResult> correlation;
    std::vector<ToolCount> tools;
    std::vector<FirstAction> first_actions;
    std::vector<Finding> findings;  // by sandbox, then sequence number
    std::map<std::string, ProgressGraph> progress;  // empty without scenario steps
    std::map<std::string, Timestamp> session_start;
};

CohortReport build_report(const SessionMap& sessions, const ScenarioSpec& scenario);

std::string render_json(const CohortReport& report, const std::set<ReportSection>& sections = kAllSections);
std::string render_text(const CohortReport& report, const std::set<ReportSection>& sections = kAllSections);

/// One JSON object per line.
std::string findings_jsonl(const std::vector<Finding>& findings);

}  // namespace cmdtrace
