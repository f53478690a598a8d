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

// JSON shapes shared by the report, the live stream and the HTTP API.

#pragma once

#include "json.hpp"

#include "cmdtrace/analytics.hpp"
#include "cmdtrace/detectors.hpp"
#include "cmdtrace/progress.hpp"
#include "cmdtrace/record.hpp"
#include "cmdtrace/stats.hpp"

namespace cmdtrace::detail {

using ojson = nlohmann::ordered_json;

inline std::string dump(const ojson& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

inline ojson record_json(const CommandRecord& r, std::uint64_t seq) {
    ojson j = ojson::parse(to_canonical_json(r));
    j["seq"] = seq;
    return j;
}

inline ojson summary_json(const std::optional<Summary>& s) {
    if (!s) return nullptr;
    return ojson{{"n", s->n},          {"total", s->total}, {"min", s->min},    {"max", s->max},
                 {"median", s->median}, {"avg", s->mean},   {"stdev", s->stdev}};
}

inline ojson finding_json(const Finding& f) {
    return ojson{{"rule_id", to_string(f.rule_id)},
                 {"sandbox_id", f.sandbox_id},
                 {"timestamp", format_iso8601(f.timestamp)},
                 {"seq", f.seq},
                 {"severity", to_string(f.severity)},
                 {"explanation", f.explanation},
                 {"evidence", f.evidence}};
}

inline ojson step_json(const StepNode& n) {
    ojson j{{"step_id", n.step_id}, {"title", n.title}, {"status", to_string(n.status)}};
    j["achieved_at"] = n.achieved_at ? ojson(format_iso8601(*n.achieved_at)) : ojson(nullptr);
    j["achieved_seq"] = n.achieved_at ? ojson(n.achieved_seq) : ojson(nullptr);
    j["achieved_by"] = n.achieved_at ? ojson(n.achieved_by) : ojson(nullptr);
    j["prerequisites"] = n.prerequisites;
    j["error_count"] = n.error_count;
    return j;
}

inline ojson error_json(const ErrorEvent& e) {
    return ojson{{"kind", to_string(e.kind)},
                 {"timestamp", format_iso8601(e.timestamp)},
                 {"seq", e.seq},
                 {"step_id", e.step_id ? ojson(*e.step_id) : ojson(nullptr)},
                 {"rule_id", e.rule_id ? ojson(to_string(*e.rule_id)) : ojson(nullptr)},
                 {"detail", e.detail},
                 {"evidence", e.evidence}};
}

inline ojson progress_json(const std::string& sandbox_id, const ProgressGraph& g) {
    ojson nodes = ojson::array();
    for (const auto& n : g.nodes) nodes.push_back(step_json(n));
    ojson errors = ojson::array();
    for (const auto& e : g.errors) errors.push_back(error_json(e));
    ojson edges = ojson::array();
    for (const auto& [from, to] : g.edges) edges.push_back(ojson{{"from", from}, {"to", to}});
    return ojson{{"sandbox_id", sandbox_id}, {"nodes", nodes}, {"edges", edges}, {"errors", errors}};
}

inline ojson timeline_event_json(const TimelineEvent& e) {
    return ojson{{"timestamp", format_iso8601(e.timestamp)},
                 {"kind", to_string(e.kind)},
                 {"correct", e.correct ? ojson(*e.correct) : ojson(nullptr)},
                 {"seq", e.seq},
                 {"label", e.label},
                 {"detail", e.detail}};
}

inline ojson error_body(std::string_view message) { return ojson{{"error", message}}; }

}  // namespace cmdtrace::detail
