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

#include "cmdtrace/detectors.hpp"

#include <algorithm>
#include <numeric>

#include "cmdtrace/normalize.hpp"
#include "text_util.hpp"

namespace cmdtrace {

namespace {

struct RuleInfo {
    RuleId id;
    std::string_view name;
};

constexpr std::array<RuleInfo, 12> kRuleNames = {{
    {RuleId::nmap_no_target, "NMAP_NO_TARGET"},
    {RuleId::nmap_ping_only, "NMAP_PING_ONLY"},
    {RuleId::nmap_router_target, "NMAP_ROUTER_TARGET"},
    {RuleId::nmap_typo_ip, "NMAP_TYPO_IP"},
    {RuleId::nmap_out_of_scope, "NMAP_OUT_OF_SCOPE"},
    {RuleId::john_no_wordlist, "JOHN_NO_WORDLIST"},
    {RuleId::john_wordlist_dir, "JOHN_WORDLIST_DIR"},
    {RuleId::msf_set_before_use, "MSF_SET_BEFORE_USE"},
    {RuleId::msf_run_before_set, "MSF_RUN_BEFORE_SET"},
    {RuleId::msf_wrong_module, "MSF_WRONG_MODULE"},
    {RuleId::msf_no_search, "MSF_NO_SEARCH"},
    {RuleId::msf_lhost_wrong, "MSF_LHOST_WRONG"},
}};

class Emitter {
public:
    Emitter(const CommandRecord& record, const DetectorContext& ctx, std::uint64_t seq, std::string evidence)
        : record_(record), ctx_(ctx), seq_(seq), evidence_(std::move(evidence)) {}

    void emit(RuleId rule, std::string explanation) {
        if (ctx_.disabled_rules.contains(rule)) return;
        for (const auto& f : out_) {
            if (f.rule_id == rule) return;  // one finding per rule and record
        }
        out_.push_back(Finding{rule, record_.sandbox_id, record_.timestamp, seq_, severity_of(rule),
                               std::move(explanation), evidence_});
    }

    std::vector<Finding> take() { return std::move(out_); }

private:
    const CommandRecord& record_;
    const DetectorContext& ctx_;
    std::uint64_t seq_;
    std::string evidence_;
    std::vector<Finding> out_;
};

bool is_help_or_version(const NormalizedCommand& nc) {
    return nc.has_flag("--help") || nc.has_flag("-h") || nc.has_flag("-V") || nc.has_flag("--version");
}

bool contains_ip(const std::vector<Ipv4>& list, Ipv4 ip) { return std::find(list.begin(), list.end(), ip) != list.end(); }

bool in_sandbox(const Cidr& target, const DetectorContext& ctx) {
    return std::any_of(ctx.cidrs.begin(), ctx.cidrs.end(), [&](const Cidr& range) {
        return target.prefix >= range.prefix && range.contains(target.network);
    });
}

void check_nmap(const NormalizedCommand& nc, const DetectorContext& ctx, Emitter& out) {
    if (is_help_or_version(nc)) return;
    const bool target_flag = nc.has_flag("-iL") || nc.has_flag("-iR");
    if (nc.positionals.empty() && !target_flag) {
        out.emit(RuleId::nmap_no_target, "nmap needs a target: a host, an address or a network range");
    }
    if (nc.has_flag("-sn") || nc.has_flag("-sP")) {
        out.emit(RuleId::nmap_ping_only, "-sn only discovers hosts; it disables the port scan");
    }
    for (const auto& p : nc.positionals) {
        const auto target = Cidr::parse(p);
        if (!target) continue;  // hostnames and nmap range syntax are not judged
        const bool single = p.find('/') == std::string::npos;
        if (single && contains_ip(ctx.targets, target->network)) continue;
        if (single && contains_ip(ctx.router_addresses, target->network)) {
            out.emit(RuleId::nmap_router_target, p + " is a router, not the target host");
            continue;
        }
        if (single) {
            const auto typo = std::find_if(ctx.targets.begin(), ctx.targets.end(),
                                           [&](Ipv4 t) { return off_by_one_digit(p, t.to_string()); });
            if (typo != ctx.targets.end()) {
                out.emit(RuleId::nmap_typo_ip, p + " is one digit off the target " + typo->to_string());
                continue;
            }
        }
        if (!ctx.cidrs.empty() && !in_sandbox(*target, ctx)) {
            out.emit(RuleId::nmap_out_of_scope, p + " is outside the training sandbox");
        }
    }
}

// john accepts unambiguous prefixes of long options and `:` as well as `=`.
std::pair<std::string, std::string> split_john_flag(const OptionPair& opt) {
    std::string flag = opt.flag;
    std::optional<std::string> value = opt.value;
    if (const auto colon = flag.find(':'); colon != std::string::npos) {
        value = flag.substr(colon + 1);
        flag.resize(colon);
    }
    while (!flag.empty() && flag.front() == '-') flag.erase(flag.begin());
    return std::make_pair(flag, value.value_or(""));
}

bool long_prefix_of(std::string_view given, std::string_view full, std::size_t min_len) {
    return given.size() >= min_len && given.size() <= full.size() && full.substr(0, given.size()) == given;
}

void check_john(const NormalizedCommand& nc, const DetectorContext& ctx, Emitter& out) {
    bool mode_flag = false;
    bool has_wordlist = false;
    std::optional<std::string> wordlist;
    for (const auto& opt : nc.options) {
        const auto [name, value] = split_john_flag(opt);
        if (name == "w" || long_prefix_of(name, "wordlist", 2)) {
            has_wordlist = true;
            if (!value.empty()) wordlist = value;
            continue;
        }
        for (std::string_view mode : {"show", "single", "incremental", "test", "restore", "status", "help", "stdin",
                                      "list", "make-charset", "external", "mask", "prince", "loopback", "pipe"}) {
            if (name == mode || long_prefix_of(name, mode, 3)) mode_flag = true;
        }
        if (name == "i" || name == "h") mode_flag = true;
    }
    const bool dictionary_context = !nc.positionals.empty() && !mode_flag;
    if (dictionary_context && !has_wordlist) {
        out.emit(RuleId::john_no_wordlist, "a dictionary attack needs --wordlist=FILE");
    }
    if (wordlist) {
        std::string_view w = *wordlist;
        bool is_dir = detail::ends_with(w, "/");
        while (w.size() > 1 && w.back() == '/') w.remove_suffix(1);
        for (std::string_view d : ctx.wordlist_dirs) {
            while (d.size() > 1 && d.back() == '/') d.remove_suffix(1);
            if (w == d) is_dir = true;
        }
        if (is_dir) out.emit(RuleId::john_wordlist_dir, "--wordlist points to a directory; it must name a file");
    }
}

bool module_matches(std::string_view used, std::string_view expected) {
    const auto trim_slashes = [](std::string_view s) {
        while (!s.empty() && s.front() == '/') s.remove_prefix(1);
        while (!s.empty() && s.back() == '/') s.remove_suffix(1);
        return s;
    };
    used = trim_slashes(used);
    expected = trim_slashes(expected);
    if (used.empty() || expected.empty()) return false;
    if (used == expected) return true;
    const auto suffix = [](std::string_view longer, std::string_view shorter) {
        return longer.size() > shorter.size() && detail::ends_with(longer, shorter) &&
               longer[longer.size() - shorter.size() - 1] == '/';
    };
    return suffix(used, expected) || suffix(expected, used);
}

std::string param_name(std::string_view raw) {
    auto name = detail::to_upper(raw);
    if (name == "RHOST") name = "RHOSTS";
    return name;
}

void check_msf(const CommandRecord& record, MsfSessionState& state, const DetectorContext& ctx, Emitter& out) {
    for (const auto& segment : split_command_list(record.cmd)) {
        const auto words = shell_split(segment);
        if (words.empty()) continue;
        const auto verb = detail::to_lower(words[0]);
        if (verb == "search") {
            state.searched = true;
        } else if (verb == "use" && words.size() >= 2) {
            const auto& module = words[1];
            state.set_params.clear();
            state.ran = false;
            if (std::all_of(module.begin(), module.end(), detail::is_digit)) {
                // `use N` picks an entry of the last search listing we never saw.
                state.selected_module = "#" + module;
                continue;
            }
            state.selected_module = module;
            if (ctx.expected_module.empty()) continue;
            if (!module_matches(module, ctx.expected_module)) {
                out.emit(RuleId::msf_wrong_module, "module " + module + " does not fit; expected " + ctx.expected_module);
            } else if (!state.searched) {
                out.emit(RuleId::msf_no_search,
                         "correct module selected without a prior search: previous knowledge or outside help");
            }
        } else if ((verb == "set" || verb == "setg") && words.size() >= 2) {
            const auto name = param_name(words[1]);
            std::string value;
            for (std::size_t i = 2; i < words.size(); ++i) value += (i > 2 ? " " : "") + words[i];
            if (name == "LHOST" && ctx.expected_lhost && words.size() >= 3 && value != *ctx.expected_lhost) {
                out.emit(RuleId::msf_lhost_wrong,
                         "LHOST must be the attacking machine " + *ctx.expected_lhost + ", not " + value);
            }
            if (verb == "setg") {
                state.global_params[name] = value;
            } else if (!state.selected_module) {
                out.emit(RuleId::msf_set_before_use, "set " + name + " before a module was selected with use");
            } else {
                state.set_params[name] = value;
            }
        } else if ((verb == "unset" || verb == "unsetg") && words.size() >= 2) {
            auto& params = verb == "unset" ? state.set_params : state.global_params;
            params.erase(param_name(words[1]));
        } else if (verb == "back") {
            state.selected_module.reset();
            state.set_params.clear();
        } else if (verb == "exploit" || verb == "run") {
            std::vector<std::string> missing;
            for (const auto& req : ctx.required_params) {
                const auto name = param_name(req);
                if (!state.set_params.contains(name) && !state.global_params.contains(name)) missing.push_back(name);
            }
            if (!missing.empty()) {
                std::sort(missing.begin(), missing.end());  // independent of configuration order
                std::string list;
                for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
                out.emit(RuleId::msf_run_before_set, verb + " before setting " + list);
            }
            state.ran = true;
        }
    }
}

}  // namespace

std::string_view to_string(RuleId rule) {
    for (const auto& info : kRuleNames) {
        if (info.id == rule) return info.name;
    }
    return "UNKNOWN";
}

std::optional<RuleId> parse_rule_id(std::string_view text) {
    for (const auto& info : kRuleNames) {
        if (info.name == text) return info.id;
    }
    return std::nullopt;
}

std::string_view to_string(Severity severity) {
    switch (severity) {
        case Severity::info: return "info";
        case Severity::warning: return "warning";
        case Severity::error: return "error";
    }
    return "warning";
}

Severity severity_of(RuleId rule) {
    switch (rule) {
        case RuleId::nmap_out_of_scope: return Severity::error;
        case RuleId::msf_no_search: return Severity::info;
        default: return Severity::warning;
    }
}

bool off_by_one_digit(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) continue;
        if (!detail::is_digit(a[i]) || !detail::is_digit(b[i])) return false;
        ++diffs;
    }
    return diffs == 1;
}

std::vector<Finding> evaluate(const CommandRecord& record, MsfSessionState& state, const DetectorContext& ctx,
                              std::uint64_t seq) {
    if (state.last_timestamp && record.timestamp.instant < state.last_timestamp->instant) {
        throw DetectorError("out-of-order record for sandbox " + record.sandbox_id + ": " +
                            format_iso8601(record.timestamp) + " precedes " + format_iso8601(*state.last_timestamp));
    }
    state.last_timestamp = record.timestamp;

    std::string evidence;
    try {
        evidence = normalize(record.cmd).canonical;
    } catch (const AnalyticsError&) {
        return {};
    }
    Emitter out(record, ctx, seq, evidence);
    if (record.cmd_type == CommandType::msf) {
        check_msf(record, state, ctx, out);
        return out.take();
    }
    for (const auto& segment : split_command_list(record.cmd)) {
        const auto nc = normalize(segment);
        if (nc.tool == "nmap") {
            check_nmap(nc, ctx, out);
        } else if (nc.tool == "john") {
            check_john(nc, ctx, out);
        }
    }
    return out.take();
}

std::pair<std::vector<Finding>, MsfSessionState> evaluate_session(const std::vector<CommandRecord>& records,
                                                                  const DetectorContext& ctx) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].timestamp.instant < records[b].timestamp.instant;
    });
    std::pair<std::vector<Finding>, MsfSessionState> result;
    for (auto i : order) {
        auto found = evaluate(records[i], result.second, ctx, i + 1);
        result.first.insert(result.first.end(), std::make_move_iterator(found.begin()),
                            std::make_move_iterator(found.end()));
    }
    return result;
}

}  // namespace cmdtrace
