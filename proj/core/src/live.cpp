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

#include "cmdtrace/live.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "json_codec.hpp"

namespace cmdtrace {

namespace {

std::vector<StreamEvent> events_for(const std::string& sandbox_id, const StoredRecord& stored,
                                    const ProgressUpdate* update, const ProgressGraph* graph) {
    std::vector<StreamEvent> out;
    out.push_back({EventKind::command, sandbox_id, stored.seq, detail::dump(detail::record_json(stored.record, stored.seq))});
    if (update == nullptr) return out;
    for (const auto& id : update->achieved) {
        auto j = detail::step_json(*graph->node(id));
        j["sandbox_id"] = sandbox_id;
        out.push_back({EventKind::step, sandbox_id, stored.seq, detail::dump(j)});
    }
    for (const auto& f : update->findings) {
        out.push_back({EventKind::finding, sandbox_id, stored.seq, detail::dump(detail::finding_json(f))});
    }
    return out;
}

}  // namespace

LiveAnalyzer::LiveAnalyzer(Broadcaster& out, ScenarioSpec scenario, std::function<void(std::string_view)> log)
    : out_(out), scenario_(std::move(scenario)), log_(std::move(log)) {}

std::vector<StreamEvent> LiveAnalyzer::observe(SandboxState& state, const StoredRecord& stored) {
    state.last_seq = stored.seq;
    try {
        const auto update = state.tracker.observe(stored.record, stored.seq);
        return events_for(stored.record.sandbox_id, stored, &update, &state.tracker.graph());
    } catch (const DetectorError& e) {
        // A record older than its predecessor (e.g. UDP reordering) is still
        // shown; batch analysis, which sorts by time, covers it properly.
        const std::string msg = "sandbox " + stored.record.sandbox_id + " seq " + std::to_string(stored.seq) +
                                ": not analysed live: " + e.what();
        if (log_) {
            log_(msg);
        } else {
            std::cerr << msg << '\n';
        }
        return events_for(stored.record.sandbox_id, stored, nullptr, nullptr);
    }
}

void LiveAnalyzer::attach(CentralStore& store) {
    {
        std::lock_guard lock(mu_);
        warming_ = true;
    }
    // Observers run under the store's sandbox lock, so the warm-up read must
    // not hold mu_. Commits that race with it are parked in pending_ and
    // deduplicated by sequence number.
    store.add_observer([this](const StoredRecord& r) { on_commit(r); });
    std::map<std::string, std::vector<StoredRecord>> existing;
    for (const auto& id : store.sandboxes()) existing[id] = store.read(id).records;

    std::vector<StreamEvent> events;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, records] : existing) {
            auto [it, _] = sandboxes_.try_emplace(id, scenario_);
            for (const auto& r : records) {
                if (r.seq > it->second.last_seq) observe(it->second, r);
            }
        }
        for (const auto& r : pending_) {
            auto [it, _] = sandboxes_.try_emplace(r.record.sandbox_id, scenario_);
            if (r.seq <= it->second.last_seq) continue;
            auto evs = observe(it->second, r);
            events.insert(events.end(), evs.begin(), evs.end());
        }
        pending_.clear();
        warming_ = false;
    }
    for (const auto& e : events) out_.publish(e);
}

void LiveAnalyzer::on_commit(const StoredRecord& stored) {
    std::vector<StreamEvent> events;
    {
        std::lock_guard lock(mu_);
        if (warming_) {
            pending_.push_back(stored);
            return;
        }
        auto [it, _] = sandboxes_.try_emplace(stored.record.sandbox_id, scenario_);
        if (stored.seq <= it->second.last_seq) return;
        events = observe(it->second, stored);
    }
    for (const auto& e : events) out_.publish(e);
}

std::vector<StreamEvent> LiveAnalyzer::replay(const std::string& sandbox_id, const std::vector<CommandRecord>& records,
                                              std::uint64_t after) const {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].timestamp.instant < records[b].timestamp.instant;
    });
    ProgressTracker tracker(scenario_);
    std::vector<std::pair<std::uint64_t, std::vector<StreamEvent>>> per_record;
    for (auto i : order) {
        const StoredRecord stored{i + 1, records[i]};
        const auto update = tracker.observe(records[i], stored.seq);
        if (stored.seq <= after) continue;
        per_record.emplace_back(stored.seq, events_for(sandbox_id, stored, &update, &tracker.graph()));
    }
    // Deliver in sequence order, like the live stream.
    std::stable_sort(per_record.begin(), per_record.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<StreamEvent> out;
    for (auto& [_, evs] : per_record) out.insert(out.end(), evs.begin(), evs.end());
    return out;
}

}  // namespace cmdtrace
