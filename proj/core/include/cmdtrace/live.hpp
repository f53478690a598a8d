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

// Turns store commits into stream events: the command itself, then any step
// it achieved, then any finding it raised.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/broadcast.hpp"
#include "cmdtrace/progress.hpp"
#include "cmdtrace/store.hpp"

namespace cmdtrace {

class LiveAnalyzer {
public:
    /// An empty scenario (no steps) still runs the detectors.
    LiveAnalyzer(Broadcaster& out, ScenarioSpec scenario, std::function<void(std::string_view)> log = {});

    /// Replays what the store already holds (without publishing) and then
    /// follows its commits. Call once.
    void attach(CentralStore& store);

    void on_commit(const StoredRecord& stored);

    [[nodiscard]] const ScenarioSpec& scenario() const { return scenario_; }

    /// Events for the records with seq > `after`, as a fresh batch pass over
    /// the whole session would produce them. Used to resume a stream.
    [[nodiscard]] std::vector<StreamEvent> replay(const std::string& sandbox_id,
                                                  const std::vector<CommandRecord>& records,
                                                  std::uint64_t after) const;

private:
    struct SandboxState {
        explicit SandboxState(const ScenarioSpec& s) : tracker(s) {}
        ProgressTracker tracker;
        std::uint64_t last_seq = 0;
    };

    std::vector<StreamEvent> observe(SandboxState& state, const StoredRecord& stored);

    Broadcaster& out_;
    ScenarioSpec scenario_;
    std::function<void(std::string_view)> log_;
    std::mutex mu_;
    std::map<std::string, SandboxState, std::less<>> sandboxes_;
    bool warming_ = false;
    std::vector<StoredRecord> pending_;  // commits seen while warming up
};

}  // namespace cmdtrace
