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

// Progress of one trainee against a scenario's reference solution: which
// steps were achieved (and when), which were skipped, and which commands
// went wrong along the way.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmdtrace/detectors.hpp"
#include "cmdtrace/scenario.hpp"

namespace cmdtrace {

enum class StepStatus { pending, achieved, omitted };

std::string_view to_string(StepStatus status);

struct StepNode {
    std::string step_id;
    std::string title;
    StepStatus status = StepStatus::pending;
    std::optional<Timestamp> achieved_at;
    std::uint64_t achieved_seq = 0;
    std::string achieved_by;  // canonical command
    std::vector<std::string> prerequisites;
    std::size_t error_count = 0;
};

enum class ErrorKind {
    near_miss,        // the step's tool, but the matcher was not satisfied
    finding,          // a detector hit
    order_violation,  // a step achieved before its prerequisites
};

std::string_view to_string(ErrorKind kind);

struct ErrorEvent {
    ErrorKind kind = ErrorKind::near_miss;
    Timestamp timestamp;
    std::uint64_t seq = 0;
    std::optional<std::string> step_id;
    std::optional<RuleId> rule_id;
    std::string detail;
    std::string evidence;
};

struct ProgressGraph {
    std::vector<StepNode> nodes;  // in scenario step order
    std::vector<ErrorEvent> errors;
    std::vector<std::pair<std::string, std::string>> edges;  // (prerequisite, step)

    [[nodiscard]] const StepNode* node(std::string_view step_id) const;
};

/// What one observed record changed.
struct ProgressUpdate {
    std::vector<std::string> achieved;  // step ids achieved by this record
    std::vector<ErrorEvent> errors;
    std::vector<Finding> findings;
};

/// Incremental mapping of one sandbox's records, in timestamp order. The
/// detector automaton runs inside, so live and batch results agree.
class ProgressTracker {
public:
    explicit ProgressTracker(ScenarioSpec scenario);

    /// Throws DetectorError when the record is older than the previous one.
    ProgressUpdate observe(const CommandRecord& record, std::uint64_t seq);

    [[nodiscard]] const ProgressGraph& graph() const { return graph_; }
    [[nodiscard]] const std::vector<Finding>& findings() const { return findings_; }
    [[nodiscard]] const MsfSessionState& msf_state() const { return msf_; }

private:
    const ScenarioStep* link_step(std::string_view tool, bool msf) const;
    StepNode& node_of(std::string_view id);
    void add_error(ErrorEvent event, ProgressUpdate& update);

    ScenarioSpec scenario_;
    ProgressGraph graph_;
    std::vector<Finding> findings_;
    MsfSessionState msf_;
};

struct SessionAnalysis {
    ProgressGraph graph;
    std::vector<Finding> findings;
};

/// Batch form: records are ordered by timestamp (stably); a record's seq is
/// its 1-based position in the input.
SessionAnalysis analyze_session(const std::vector<CommandRecord>& records, const ScenarioSpec& scenario);
ProgressGraph map_session(const std::vector<CommandRecord>& records, const ScenarioSpec& scenario);

enum class TimelineKind { command, step_achieved, finding };

std::string_view to_string(TimelineKind kind);

struct TimelineEvent {
    Timestamp timestamp;
    TimelineKind kind = TimelineKind::command;
    /// true: achieved a step; false: carries a finding; absent: neutral.
    std::optional<bool> correct;
    std::uint64_t seq = 0;  // the command the event belongs to
    std::string label;      // command text, step id or rule id
    std::string detail;
};

/// Commands, step achievements and findings merged in time order; at equal
/// timestamps commands come before steps, steps before findings.
std::vector<TimelineEvent> timeline(const std::vector<CommandRecord>& records, const std::vector<Finding>& findings,
                                    const ProgressGraph& graph);

enum class TimelineFilter { all, correct, erroneous, neutral };

std::vector<TimelineEvent> filter_timeline(const std::vector<TimelineEvent>& events, TimelineFilter filter);

}  // namespace cmdtrace
