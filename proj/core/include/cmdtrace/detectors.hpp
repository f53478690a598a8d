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

// Rule engine for common mistakes with nmap, john and the Metasploit console.
//
// The Metasploit rules follow the expected course of action
//   search -> use <module> -> set <param> <value> -> exploit | run
// with one small automaton per sandbox.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmdtrace/ipv4.hpp"
#include "cmdtrace/record.hpp"

namespace cmdtrace {

enum class RuleId {
    nmap_no_target,
    nmap_ping_only,
    nmap_router_target,
    nmap_typo_ip,
    nmap_out_of_scope,
    john_no_wordlist,
    john_wordlist_dir,
    msf_set_before_use,
    msf_run_before_set,
    msf_wrong_module,
    msf_no_search,
    msf_lhost_wrong,
};

inline constexpr std::array kAllRules = {
    RuleId::nmap_no_target,    RuleId::nmap_ping_only,     RuleId::nmap_router_target, RuleId::nmap_typo_ip,
    RuleId::nmap_out_of_scope, RuleId::john_no_wordlist,   RuleId::john_wordlist_dir,  RuleId::msf_set_before_use,
    RuleId::msf_run_before_set, RuleId::msf_wrong_module,  RuleId::msf_no_search,      RuleId::msf_lhost_wrong,
};

/// `NMAP_NO_TARGET` style names.
std::string_view to_string(RuleId rule);
std::optional<RuleId> parse_rule_id(std::string_view text);

enum class Severity { info, warning, error };

std::string_view to_string(Severity severity);
Severity severity_of(RuleId rule);

/// Ground truth of one exercise, normally read from the scenario file.
struct DetectorContext {
    std::vector<Ipv4> targets;
    std::vector<Ipv4> router_addresses;
    std::vector<Cidr> cidrs;  // address ranges that belong to the sandbox
    std::string expected_module;
    std::optional<std::string> expected_lhost;
    std::vector<std::string> required_params;  // upper-case names, e.g. RHOSTS
    std::vector<std::string> wordlist_dirs;    // known directories on trainee hosts
    std::set<RuleId> disabled_rules;
};

struct Finding {
    RuleId rule_id = RuleId::nmap_no_target;
    std::string sandbox_id;
    Timestamp timestamp;
    std::uint64_t seq = 0;  // store sequence number of the record, 0 if unknown
    Severity severity = Severity::warning;
    std::string explanation;
    std::string evidence;  // canonical form of the offending command

    friend bool operator==(const Finding&, const Finding&) = default;
};

struct MsfSessionState {
    bool searched = false;
    std::optional<std::string> selected_module;  // `#N` for `use N` (identity unknown)
    std::map<std::string, std::string> set_params;
    std::map<std::string, std::string> global_params;  // from setg; survive `use`
    bool ran = false;
    std::optional<Timestamp> last_timestamp;  // of any record of the sandbox

    friend bool operator==(const MsfSessionState&, const MsfSessionState&) = default;
};

class DetectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluates one record. Records of one sandbox must arrive in timestamp
/// order; a regression throws DetectorError (OutOfOrderRecord).
std::vector<Finding> evaluate(const CommandRecord& record, MsfSessionState& state, const DetectorContext& ctx,
                              std::uint64_t seq = 0);

/// Orders the records by timestamp (stably) and folds them through
/// evaluate(). A record's seq is its 1-based position in the input, which
/// equals the store sequence number for records read from the store.
std::pair<std::vector<Finding>, MsfSessionState> evaluate_session(const std::vector<CommandRecord>& records,
                                                                  const DetectorContext& ctx);

/// One character differs, and it is a digit on both sides
/// (`172.18.1.6` vs `172.18.1.5`).
bool off_by_one_digit(std::string_view a, std::string_view b);

}  // namespace cmdtrace
