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

#include "cmdtrace/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include "json.hpp"
#include <sstream>

#include "text_util.hpp"

namespace cmdtrace {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& msg) { throw ScenarioError(ScenarioErrorKind::malformed, msg); }

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& where) {
    std::vector<std::string> out;
    if (!obj.contains(key)) return out;
    const auto& v = obj.at(key);
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
        return out;
    }
    if (!v.is_array()) malformed(where + "." + key + " must be a string or a list of strings");
    for (const auto& item : v) {
        if (!item.is_string()) malformed(where + "." + key + " must contain only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::vector<Ipv4> address_list(const json& ctx, const char* key) {
    std::vector<Ipv4> out;
    for (const auto& s : string_list(ctx, key, "context")) {
        auto ip = Ipv4::parse(s);
        if (!ip) malformed(std::string("context.") + key + ": '" + s + "' is not an IPv4 address");
        out.push_back(*ip);
    }
    return out;
}

OptionPattern parse_option_pattern(std::string_view text, const std::string& where) {
    const auto t = detail::trim(text);
    if (t.empty() || t[0] != '-') malformed(where + ": option pattern '" + std::string(text) + "' must start with '-'");
    OptionPattern p;
    const auto sp = t.find(' ');
    if (sp == std::string_view::npos) {
        p.flag = std::string(t);
        return p;
    }
    p.flag = std::string(t.substr(0, sp));
    p.value = ValuePattern::parse(detail::trim(t.substr(sp + 1)));
    return p;
}

StepMatcher parse_matcher(const json& m, const std::string& where) {
    if (!m.is_object()) malformed(where + ".match must be an object");
    StepMatcher matcher;
    matcher.tools = string_list(m, "tool", where + ".match");
    if (matcher.tools.empty()) malformed(where + ".match.tool is required");
    if (m.contains("cmd_type")) {
        if (!m.at("cmd_type").is_string()) malformed(where + ".match.cmd_type must be a string");
        matcher.cmd_type = parse_command_type(m.at("cmd_type").get<std::string>());
        if (!matcher.cmd_type) malformed(where + ".match.cmd_type must be bash-command or msf-command");
    }
    for (const auto& o : string_list(m, "options", where + ".match")) {
        matcher.options.push_back(parse_option_pattern(o, where));
    }
    for (const auto& p : string_list(m, "positionals", where + ".match")) {
        matcher.positionals.push_back(ValuePattern::parse(p));
    }
    return matcher;
}

// Returns one cycle (in prerequisite order) if the graph has any.
std::optional<std::vector<std::string>> find_cycle(const std::vector<ScenarioStep>& steps) {
    std::map<std::string, const ScenarioStep*, std::less<>> by_id;
    for (const auto& s : steps) by_id[s.id] = &s;
    std::map<std::string, int, std::less<>> color;  // 0 new, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::optional<std::vector<std::string>> cycle;

    std::function<bool(const std::string&)> visit = [&](const std::string& id) {
        color[id] = 1;
        stack.push_back(id);
        for (const auto& p : by_id.at(id)->prerequisites) {
            if (color[p] == 1) {
                auto it = std::find(stack.begin(), stack.end(), p);
                cycle = std::vector<std::string>(it, stack.end());
                return true;
            }
            if (color[p] == 0 && visit(p)) return true;
        }
        stack.pop_back();
        color[id] = 2;
        return false;
    };
    for (const auto& s : steps) {
        if (color[s.id] == 0 && visit(s.id)) return cycle;
    }
    return std::nullopt;
}

}  // namespace

ValuePattern ValuePattern::parse(std::string_view text) {
    ValuePattern p;
    p.text_ = std::string(text);
    if (text == "*") {
        p.kind_ = Kind::any;
    } else if (detail::starts_with(text, "cidr:")) {
        p.kind_ = Kind::cidr;
        p.cidr_ = Cidr::parse(text.substr(5));
        if (!p.cidr_) malformed("bad CIDR in pattern '" + p.text_ + "'");
    } else if (detail::starts_with(text, "re:")) {
        p.kind_ = Kind::regex;
        try {
            p.regex_.emplace(std::string(text.substr(3)), std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            malformed("bad regex in pattern '" + p.text_ + "': " + e.what());
        }
    }
    return p;
}

bool ValuePattern::matches(std::string_view value) const {
    switch (kind_) {
        case Kind::any: return true;
        case Kind::literal: return value == text_;
        case Kind::cidr: {
            const auto c = Cidr::parse(value);
            return c && c->prefix >= cidr_->prefix && cidr_->contains(c->network);
        }
        case Kind::regex: return std::regex_search(value.begin(), value.end(), *regex_);
    }
    return false;
}

bool StepMatcher::uses_tool(std::string_view tool) const {
    return std::find(tools.begin(), tools.end(), tool) != tools.end();
}

bool StepMatcher::matches(const NormalizedCommand& command, CommandType type) const {
    if (!uses_tool(command.tool)) return false;
    if (cmd_type && *cmd_type != type) return false;
    for (const auto& want : options) {
        const bool ok = std::any_of(command.options.begin(), command.options.end(), [&](const OptionPair& have) {
            if (have.flag != want.flag) return false;
            if (!want.value) return true;
            return have.value && want.value->matches(*have.value);
        });
        if (!ok) return false;
    }
    for (const auto& want : positionals) {
        const bool ok = std::any_of(command.positionals.begin(), command.positionals.end(),
                                    [&](const std::string& p) { return want.matches(p); });
        if (!ok) return false;
    }
    return true;
}

const ScenarioStep* ScenarioSpec::find_step(std::string_view id) const {
    for (const auto& s : steps) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::vector<std::string> ScenarioSpec::transitive_prerequisites(std::string_view id) const {
    std::set<std::string, std::less<>> seen;
    std::vector<std::string> todo;
    if (const auto* s = find_step(id)) todo = s->prerequisites;
    while (!todo.empty()) {
        auto cur = std::move(todo.back());
        todo.pop_back();
        if (!seen.insert(cur).second) continue;
        if (const auto* s = find_step(cur)) todo.insert(todo.end(), s->prerequisites.begin(), s->prerequisites.end());
    }
    std::vector<std::string> out;
    for (const auto& s : steps) {
        if (seen.contains(s.id)) out.push_back(s.id);
    }
    return out;
}

FirstActionOptions ScenarioSpec::first_action_options(std::size_t k) const {
    FirstActionOptions o;
    o.k = k;
    o.start_tools = start_tools;
    o.targets = context.targets;
    for (const auto& s : steps) o.scenario_tools.insert(s.matcher.tools.begin(), s.matcher.tools.end());
    return o;
}

ScenarioSpec parse_scenario(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        malformed(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) malformed("scenario must be a JSON object");
    ScenarioSpec spec;
    try {
        spec.name = doc.value("name", "");
        if (!doc.contains("steps") || !doc.at("steps").is_array()) malformed("scenario.steps must be a list");
        std::set<std::string, std::less<>> ids;
        for (std::size_t i = 0; i < doc.at("steps").size(); ++i) {
            const auto& s = doc.at("steps")[i];
            const auto where = "steps[" + std::to_string(i) + "]";
            if (!s.is_object()) malformed(where + " must be an object");
            ScenarioStep step;
            if (!s.contains("id") || !s.at("id").is_string() || s.at("id").get<std::string>().empty()) {
                malformed(where + ".id must be a non-empty string");
            }
            step.id = s.at("id").get<std::string>();
            if (!ids.insert(step.id).second) malformed("duplicate step id '" + step.id + "'");
            step.title = s.value("title", step.id);
            if (!s.contains("match")) malformed(where + ".match is required");
            step.matcher = parse_matcher(s.at("match"), where);
            step.prerequisites = string_list(s, "prerequisites", where);
            spec.steps.push_back(std::move(step));
        }
        for (const auto& step : spec.steps) {
            for (const auto& p : step.prerequisites) {
                if (!ids.contains(p)) malformed("step '" + step.id + "' depends on unknown step '" + p + "'");
            }
        }
        if (auto cycle = find_cycle(spec.steps)) {
            std::string list;
            for (const auto& id : *cycle) list += (list.empty() ? "" : " -> ") + id;
            throw ScenarioError(ScenarioErrorKind::cyclic_prerequisites, "cyclic prerequisites: " + list, *cycle);
        }

        const json ctx = doc.value("context", json::object());
        if (!ctx.is_object()) malformed("scenario.context must be an object");
        auto& dc = spec.context;
        dc.targets = address_list(ctx, "targets");
        dc.router_addresses = address_list(ctx, "router_addresses");
        for (const auto& c : string_list(ctx, "cidrs", "context")) {
            auto cidr = Cidr::parse(c);
            if (!cidr) malformed("context.cidrs: '" + c + "' is not a CIDR range");
            dc.cidrs.push_back(*cidr);
        }
        dc.expected_module = ctx.value("expected_module", "");
        if (ctx.contains("expected_lhost")) {
            dc.expected_lhost = ctx.at("expected_lhost").get<std::string>();
            if (!Ipv4::parse(*dc.expected_lhost)) malformed("context.expected_lhost must be an IPv4 address");
        }
        for (auto& p : string_list(ctx, "required_params", "context")) dc.required_params.push_back(detail::to_upper(p));
        dc.wordlist_dirs = string_list(ctx, "wordlist_dirs", "context");
        for (const auto& r : string_list(ctx, "disabled_rules", "context")) {
            auto id = parse_rule_id(r);
            if (!id) malformed("context.disabled_rules: unknown rule '" + r + "'");
            dc.disabled_rules.insert(*id);
        }
        if (ctx.contains("start_tools")) {
            auto tools = string_list(ctx, "start_tools", "context");
            spec.start_tools = {tools.begin(), tools.end()};
        }
    } catch (const json::exception& e) {
        malformed(std::string("scenario: ") + e.what());
    }
    return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(ScenarioErrorKind::io, "cannot open scenario " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace cmdtrace
