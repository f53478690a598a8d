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

#include "cmdtrace/normalize.hpp"

#include <algorithm>
#include <map>
#include <set>
#include "json.hpp"

#include "text_util.hpp"

namespace cmdtrace {

namespace detail {
extern const std::string_view kOptionArityJson;
}

namespace {

using ArityTable = std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>>;

const ArityTable& arity_table() {
    static const ArityTable table = [] {
        ArityTable t;
        const auto doc = nlohmann::json::parse(detail::kOptionArityJson);
        for (const auto& [tool, flags] : doc.items()) {
            auto& entry = t[tool];
            for (const auto& [flag, arity] : flags.items()) entry[flag] = arity.get<int>();
        }
        return t;
    }();
    return table;
}

std::optional<int> lookup(std::string_view tool, std::string_view flag) {
    const auto& table = arity_table();
    auto t = table.find(tool);
    if (t == table.end()) return std::nullopt;
    auto f = t->second.find(flag);
    if (f == t->second.end()) return std::nullopt;
    return f->second;
}

bool needs_quoting(std::string_view w) {
    if (w.empty()) return true;
    return std::any_of(w.begin(), w.end(), [](char c) {
        return detail::is_space(c) || c == '\'' || c == '"' || c == '\\' || c == '$' || c == '`' || c == ';' ||
               c == '&' || c == '|' || c == '<' || c == '>' || c == '(' || c == ')' || c == '*' || c == '?' ||
               c == '#' || c == '~' || c == '{' || c == '}' || c == '[' || c == ']';
    });
}

std::string basename_of(std::string_view word) {
    const auto slash = word.rfind('/');
    if (slash == std::string_view::npos || slash + 1 == word.size()) return std::string(word);
    return std::string(word.substr(slash + 1));
}

// `sudo [options] cmd ...` is analysed as `cmd ...`. Returns the index of the
// wrapped command word, or 0 when there is none (plain `sudo -i`).
std::size_t unwrap_sudo(const std::vector<std::string>& words) {
    if (words.empty() || basename_of(words[0]) != "sudo") return 0;
    static const std::set<std::string, std::less<>> with_value = {"-u", "-g", "-C", "-D", "-p", "-R", "-r",
                                                                  "-t", "-T", "-U", "-h"};
    std::size_t i = 1;
    while (i < words.size() && words[i].size() > 1 && words[i][0] == '-') {
        if (words[i] == "--") return i + 1 < words.size() ? i + 1 : 0;
        i += with_value.contains(words[i]) ? 2 : 1;
    }
    return i < words.size() ? i : 0;
}

}  // namespace

bool NormalizedCommand::has_flag(std::string_view flag) const {
    return std::any_of(options.begin(), options.end(), [&](const OptionPair& p) { return p.flag == flag; });
}

std::optional<std::string> NormalizedCommand::value_of(std::string_view flag) const {
    for (const auto& p : options) {
        if (p.flag == flag && p.value) return p.value;
    }
    return std::nullopt;
}

std::vector<std::string> shell_split(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    bool in_word = false;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (detail::is_space(c)) {
            if (in_word) words.push_back(std::move(cur));
            cur.clear();
            in_word = false;
            ++i;
            continue;
        }
        in_word = true;
        if (c == '\'') {
            const auto end = text.find('\'', i + 1);
            const auto stop = end == std::string_view::npos ? text.size() : end;
            cur.append(text.substr(i + 1, stop - i - 1));
            i = end == std::string_view::npos ? text.size() : end + 1;
        } else if (c == '"') {
            ++i;
            while (i < text.size() && text[i] != '"') {
                if (text[i] == '\\' && i + 1 < text.size() &&
                    (text[i + 1] == '"' || text[i + 1] == '\\' || text[i + 1] == '$' || text[i + 1] == '`')) {
                    ++i;
                }
                cur.push_back(text[i++]);
            }
            if (i < text.size()) ++i;
        } else if (c == '\\' && i + 1 < text.size()) {
            cur.push_back(text[i + 1]);
            i += 2;
        } else {
            cur.push_back(c);
            ++i;
        }
    }
    if (in_word) words.push_back(std::move(cur));
    return words;
}

std::vector<std::string> split_command_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    char quote = 0;
    const auto flush = [&](std::size_t end) {
        const auto seg = detail::trim(text.substr(start, end - start));
        if (!seg.empty()) out.emplace_back(seg);
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quote != 0) {
            if (c == '\\' && quote == '"') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (c == '\\') {
            ++i;
        } else if (c == '\'' || c == '"') {
            quote = c;
        } else if (c == ';' || c == '&' || c == '|') {
            flush(i);
            if (i + 1 < text.size() && (c == '&' || c == '|') && text[i + 1] == c) ++i;
            start = i + 1;
        }
    }
    if (start < text.size()) flush(text.size());
    return out;
}

std::vector<std::string> command_tools(std::string_view text) {
    std::vector<std::string> tools;
    for (const auto& seg : split_command_list(text)) {
        auto words = shell_split(seg);
        if (!words.empty()) tools.push_back(basename_of(words[unwrap_sudo(words)]));
    }
    return tools;
}

int option_arity(std::string_view tool, std::string_view flag) {
    if (auto a = lookup(tool, flag)) return *a;
    // Trainees often double a short flag (`--p 10000`); treat it like `-p`.
    if (detail::starts_with(flag, "--") && flag.size() > 2) {
        if (auto a = lookup(tool, flag.substr(1)); a && *a == 1) return 1;
    }
    return 0;
}

std::string shell_quote(std::string_view word) {
    if (!needs_quoting(word)) return std::string(word);
    std::string out = "'";
    for (char c : word) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('\'');
    return out;
}

NormalizedCommand normalize(std::string_view cmd) {
    auto words = shell_split(cmd);
    if (words.empty()) throw AnalyticsError(AnalyticsErrorKind::empty_command, "empty command");
    words.erase(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(unwrap_sudo(words)));

    NormalizedCommand out;
    out.tool = basename_of(words[0]);
    bool options_done = false;
    std::vector<OptionPair> dangling;  // value-taking flags with nothing after them
    for (std::size_t i = 1; i < words.size(); ++i) {
        const auto& w = words[i];
        if (options_done || w.size() < 2 || w[0] != '-') {
            out.positionals.push_back(w);
            continue;
        }
        if (w == "--") {
            options_done = true;
            continue;
        }
        if (detail::starts_with(w, "--")) {
            if (const auto eq = w.find('='); eq != std::string::npos) {
                out.options.push_back({w.substr(0, eq), w.substr(eq + 1)});
                continue;
            }
        }
        if (option_arity(out.tool, w) == 1) {
            if (i + 1 < words.size()) {
                out.options.push_back({w, words[i + 1]});
                ++i;
            } else {
                dangling.push_back({w, std::nullopt});
            }
            continue;
        }
        out.options.push_back({w, std::nullopt});
    }
    std::sort(out.options.begin(), out.options.end());
    out.options.erase(std::unique(out.options.begin(), out.options.end()), out.options.end());

    std::string& c = out.canonical;
    c = shell_quote(out.tool);
    for (const auto& opt : out.options) {
        c += ' ';
        if (!opt.value) {
            c += shell_quote(opt.flag);
        } else if (option_arity(out.tool, opt.flag) == 1) {
            c += shell_quote(opt.flag) + ' ' + shell_quote(*opt.value);
        } else {
            // Only reachable from `--flag=value`; keep the glued form.
            c += shell_quote(opt.flag + "=" + *opt.value);
        }
    }
    const bool guard = std::any_of(out.positionals.begin(), out.positionals.end(),
                                   [](const std::string& p) { return p.size() >= 2 && p[0] == '-'; });
    if (guard) c += " --";
    for (const auto& p : out.positionals) {
        c += ' ';
        c += shell_quote(p);
    }
    // A value-taking flag at the very end must stay last or it would swallow
    // a positional when the canonical form is normalized again.
    for (const auto& d : dangling) {
        out.options.push_back(d);
        c += ' ';
        c += shell_quote(d.flag);
    }
    std::sort(out.options.begin(), out.options.end());
    out.options.erase(std::unique(out.options.begin(), out.options.end()), out.options.end());
    return out;
}

}  // namespace cmdtrace
