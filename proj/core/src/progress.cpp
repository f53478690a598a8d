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

#include "cmdtrace/progress.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace cmdtrace {

namespace {

bool is_help(const NormalizedCommand& nc) {
    return nc.tool == "man" || nc.has_flag("--help") || nc.has_flag("-h") || nc.has_flag("-V") ||
           nc.has_flag("--version");
}

}  // namespace

std::string_view to_string(StepStatus status) {
    switch (status) {
        case StepStatus::pending: return "pending";
        case StepStatus::achieved: return "achieved";
        case StepStatus::omitted: return "omitted";
    }
    return "pending";
}

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::near_miss: return "near-miss";
        case ErrorKind::finding: return "finding";
        case ErrorKind::order_violation: return "order-violation";
    }
    return "near-miss";
}

std::string_view to_string(TimelineKind kind) {
    switch (kind) {
        case TimelineKind::command: return "command";
        case TimelineKind::step_achieved: return "step-achieved";
        case TimelineKind::finding: return "finding";
    }
    return "command";
}

const StepNode* ProgressGraph::node(std::string_view step_id) const {
    for (const auto& n : nodes) {
        if (n.step_id == step_id) return &n;
    }
    return nullptr;
}

ProgressTracker::ProgressTracker(ScenarioSpec scenario) : scenario_(std::move(scenario)) {
    for (const auto& step : scenario_.steps) {
        StepNode n;
        n.step_id = step.id;
        n.title = step.title;
        n.prerequisites = step.prerequisites;
        graph_.nodes.push_back(std::move(n));
        for (const auto& p : step.prerequisites) graph_.edges.emplace_back(p, step.id);
    }
}

StepNode& ProgressTracker::node_of(std::string_view id) {
    for (auto& n : graph_.nodes) {
        if (n.step_id == id) return n;
    }
    throw std::logic_error("unknown step " + std::string(id));
}

// Nearest step for an error: the first not-yet-achieved step using the tool,
// else the last step using it. Console commands without a step of their own
// fall back to the console steps.
const ScenarioStep* ProgressTracker::link_step(std::string_view tool, bool msf) const {
    const ScenarioStep* last = nullptr;
    for (const auto& s : scenario_.steps) {
        if (!s.matcher.uses_tool(tool)) continue;
        if (graph_.node(s.id)->status != StepStatus::achieved) return &s;
        last = &s;
    }
    if (last != nullptr || !msf) return last;
    for (const auto& s : scenario_.steps) {
        if (s.matcher.cmd_type != CommandType::msf) continue;
        if (graph_.node(s.id)->status != StepStatus::achieved) return &s;
        last = &s;
    }
    return last;
}

void ProgressTracker::add_error(ErrorEvent event, ProgressUpdate& update) {
    if (event.step_id) ++node_of(*event.step_id).error_count;
    graph_.errors.push_back(event);
    update.errors.push_back(std::move(event));
}

ProgressUpdate ProgressTracker::observe(const CommandRecord& record, std::uint64_t seq) {
    ProgressUpdate update;
    update.findings = evaluate(record, msf_, scenario_.context, seq);

    std::vector<NormalizedCommand> segments;
    for (const auto& seg : split_command_list(record.cmd)) segments.push_back(normalize(seg));

    // Step achievement: first matching record wins.
    for (const auto& step : scenario_.steps) {
        auto& node = node_of(step.id);
        if (node.status == StepStatus::achieved) continue;
        const auto hit = std::find_if(segments.begin(), segments.end(), [&](const NormalizedCommand& nc) {
            return step.matcher.matches(nc, record.cmd_type);
        });
        if (hit == segments.end()) continue;
        node.status = StepStatus::achieved;
        node.achieved_at = record.timestamp;
        node.achieved_seq = seq;
        node.achieved_by = hit->canonical;
        update.achieved.push_back(step.id);

        std::vector<std::string> skipped;
        for (const auto& p : scenario_.transitive_prerequisites(step.id)) {
            auto& pn = node_of(p);
            if (pn.status == StepStatus::achieved) continue;
            pn.status = StepStatus::omitted;
            skipped.push_back(p);
        }
        if (!skipped.empty()) {
            std::string list;
            for (const auto& s : skipped) list += (list.empty() ? "" : ", ") + s;
            add_error(ErrorEvent{ErrorKind::order_violation, record.timestamp, seq, step.id, std::nullopt,
                                 "achieved before " + list, hit->canonical},
                      update);
        }
    }

    // Near-misses: a step's tool that satisfied no step at all.
    for (const auto& nc : segments) {
        if (is_help(nc)) continue;
        const bool matched_any = std::any_of(scenario_.steps.begin(), scenario_.steps.end(), [&](const ScenarioStep& s) {
            return s.matcher.matches(nc, record.cmd_type);
        });
        if (matched_any) continue;
        const ScenarioStep* step = link_step(nc.tool, false);
        if (step == nullptr) continue;
        add_error(ErrorEvent{ErrorKind::near_miss, record.timestamp, seq, step->id, std::nullopt,
                             "does not satisfy step '" + step->id + "'", nc.canonical},
                  update);
    }

    for (const auto& f : update.findings) {
        const auto tools = command_tools(record.cmd);
        const ScenarioStep* step = nullptr;
        for (const auto& t : tools) {
            if ((step = link_step(t, record.cmd_type == CommandType::msf)) != nullptr) break;
        }
        add_error(ErrorEvent{ErrorKind::finding, f.timestamp, seq,
                             step != nullptr ? std::optional<std::string>(step->id) : std::nullopt, f.rule_id,
                             f.explanation, f.evidence},
                  update);
        findings_.push_back(f);
    }
    return update;
}

SessionAnalysis analyze_session(const std::vector<CommandRecord>& records, const ScenarioSpec& scenario) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].timestamp.instant < records[b].timestamp.instant;
    });
    ProgressTracker tracker(scenario);
    for (auto i : order) tracker.observe(records[i], i + 1);
    return {tracker.graph(), tracker.findings()};
}

ProgressGraph map_session(const std::vector<CommandRecord>& records, const ScenarioSpec& scenario) {
    return analyze_session(records, scenario).graph;
}

std::vector<TimelineEvent> timeline(const std::vector<CommandRecord>& records, const std::vector<Finding>& findings,
                                    const ProgressGraph& graph) {
    std::set<std::uint64_t> achieving;
    for (const auto& n : graph.nodes) {
        if (n.status == StepStatus::achieved) achieving.insert(n.achieved_seq);
    }
    std::set<std::uint64_t> flagged;
    for (const auto& f : findings) flagged.insert(f.seq);

    std::vector<TimelineEvent> events;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::uint64_t seq = i + 1;
        TimelineEvent e{records[i].timestamp, TimelineKind::command, std::nullopt, seq, records[i].cmd, {}};
        if (flagged.contains(seq)) {
            e.correct = false;
        } else if (achieving.contains(seq)) {
            e.correct = true;
        }
        events.push_back(std::move(e));
    }
    for (const auto& n : graph.nodes) {
        if (n.status != StepStatus::achieved) continue;
        events.push_back({*n.achieved_at, TimelineKind::step_achieved, true, n.achieved_seq, n.step_id, n.title});
    }
    for (const auto& f : findings) {
        events.push_back({f.timestamp, TimelineKind::finding, false, f.seq, std::string(to_string(f.rule_id)),
                          f.explanation});
    }
    std::stable_sort(events.begin(), events.end(), [](const TimelineEvent& a, const TimelineEvent& b) {
        if (a.timestamp.instant != b.timestamp.instant) return a.timestamp.instant < b.timestamp.instant;
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.seq < b.seq;
    });
    return events;
}

std::vector<TimelineEvent> filter_timeline(const std::vector<TimelineEvent>& events, TimelineFilter filter) {
    std::vector<TimelineEvent> out;
    std::copy_if(events.begin(), events.end(), std::back_inserter(out), [&](const TimelineEvent& e) {
        switch (filter) {
            case TimelineFilter::all: return true;
            case TimelineFilter::correct: return e.correct == true;
            case TimelineFilter::erroneous: return e.correct == false;
            case TimelineFilter::neutral: return !e.correct.has_value();
        }
        return true;
    });
    return out;
}

}  // namespace cmdtrace
