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

// Scenario files describe the reference solution of an exercise:
//
//   {
//     "name": "...",
//     "steps": [
//       {"id": "scan", "title": "...", "prerequisites": [],
//        "match": {"tool": "nmap", "options": ["-sV", "-p 10000"],
//                  "positionals": ["cidr:172.18.1.0/24"]}}
//     ],
//     "context": {"targets": [...], "cidrs": [...], "router_addresses": [...],
//                 "expected_module": "...", "expected_lhost": "...",
//                 "required_params": [...], "start_tools": [...],
//                 "wordlist_dirs": [...], "disabled_rules": [...]}
//   }
//
// Value patterns: a literal, `*` (anything), `cidr:NET/LEN` (an address or
// network inside NET/LEN) or `re:REGEX` (ECMAScript, searched). An option
// pattern is a bare flag (`-sV`, value ignored) or `FLAG VALUE-PATTERN`.
// Every positional pattern must be met by at least one positional.

#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmdtrace/analytics.hpp"
#include "cmdtrace/detectors.hpp"
#include "cmdtrace/normalize.hpp"

namespace cmdtrace {

enum class ScenarioErrorKind { malformed, cyclic_prerequisites, io };

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(ScenarioErrorKind kind, const std::string& message, std::vector<std::string> step_ids = {})
        : std::runtime_error(message), kind_(kind), step_ids_(std::move(step_ids)) {}
    [[nodiscard]] ScenarioErrorKind kind() const noexcept { return kind_; }
    /// For cyclic_prerequisites: the steps on the cycle.
    [[nodiscard]] const std::vector<std::string>& step_ids() const noexcept { return step_ids_; }

private:
    ScenarioErrorKind kind_;
    std::vector<std::string> step_ids_;
};

class ValuePattern {
public:
    /// Throws ScenarioError(malformed) for a bad regex or CIDR.
    static ValuePattern parse(std::string_view text);
    [[nodiscard]] bool matches(std::string_view value) const;
    [[nodiscard]] const std::string& text() const { return text_; }

private:
    enum class Kind { literal, any, cidr, regex };
    Kind kind_ = Kind::literal;
    std::string text_;
    std::optional<Cidr> cidr_;
    std::optional<std::regex> regex_;
};

struct OptionPattern {
    std::string flag;
    std::optional<ValuePattern> value;  // nullopt: presence is enough
};

struct StepMatcher {
    std::vector<std::string> tools;
    std::optional<CommandType> cmd_type;
    std::vector<OptionPattern> options;
    std::vector<ValuePattern> positionals;

    [[nodiscard]] bool uses_tool(std::string_view tool) const;
    [[nodiscard]] bool matches(const NormalizedCommand& command, CommandType type) const;
};

struct ScenarioStep {
    std::string id;
    std::string title;
    StepMatcher matcher;
    std::vector<std::string> prerequisites;
};

struct ScenarioSpec {
    std::string name;
    std::vector<ScenarioStep> steps;
    DetectorContext context;
    std::set<std::string, std::less<>> start_tools{"nmap"};

    [[nodiscard]] const ScenarioStep* find_step(std::string_view id) const;
    /// Steps that must precede `id`, directly or transitively, in step order.
    [[nodiscard]] std::vector<std::string> transitive_prerequisites(std::string_view id) const;
    [[nodiscard]] FirstActionOptions first_action_options(std::size_t k = 5) const;
};

ScenarioSpec parse_scenario(std::string_view json_text);
ScenarioSpec load_scenario(const std::filesystem::path& path);

}  // namespace cmdtrace
