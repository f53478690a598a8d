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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and time
// budgets are fixed below; the process exits non-zero if any line fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "cmdtrace/agent.hpp"
#include "cmdtrace/analytics.hpp"
#include "cmdtrace/collector.hpp"
#include "cmdtrace/progress.hpp"
#include "cmdtrace/record.hpp"
#include "cmdtrace/scenario.hpp"
#include "cmdtrace/stats.hpp"
#include "cmdtrace/store.hpp"
#include "corpus.hpp"
#include "oracles.hpp"
#include "service_stack.hpp"
#include "test_support.hpp"

using namespace cmdtrace;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;
using testsupport::TempDir;

namespace {

constexpr double kSummaryRelTol = 1e-9;
constexpr double kRhoAbsTol = 1e-12;
constexpr double kPValueAbsTol = 0.02;

constexpr auto kBudget1 = 1s;
constexpr auto kBudget2 = 10s;
constexpr auto kBudget3 = 60s;
constexpr auto kBudget5 = 5s;
constexpr auto kBudget6 = 60s;

// The figure pair: a locally logged line and the stored JSON document.
constexpr std::string_view kFigureLine =
    R"(Jul 03 2020 8:09:25 username="root" attacker src="10.1.135.83" wd="/home" cmd="nmap --help" cmd_type="bash-command" sid="1")";
constexpr std::string_view kFigureJson = R"({
  "timestamp"  : "2020-07-03T08:09:25+01:00",
  "username"   : "root",
  "hostname"   : "attacker",
  "ip"         : "10.1.135.83",
  "wd"         : "/home",
  "cmd"        : "nmap --help",
  "cmd_type"   : "bash-command",
  "sandbox_id" : "1"
})";

/// Thrown by check() to fail the current criterion with a reason.
struct Failure {
    std::string why;
};

void check(bool ok, const std::string& why) {
    if (!ok) throw Failure{why};
}

int failures = 0;

void criterion(int n, const std::string& title, std::chrono::milliseconds budget, const std::function<void()>& body) {
    const auto t0 = Clock::now();
    std::string verdict = "PASS";
    std::string why;
    try {
        body();
    } catch (const Failure& f) {
        verdict = "FAIL";
        why = f.why;
    } catch (const std::exception& e) {
        verdict = "FAIL";
        why = std::string("exception: ") + e.what();
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0);
    if (verdict == "PASS" && elapsed > budget) {
        verdict = "FAIL";
        why = "over time budget of " + std::to_string(budget.count()) + " ms";
    }
    if (verdict == "FAIL") ++failures;
    std::cout << verdict << "  " << n << "  " << title << "  (" << elapsed.count() << " ms)";
    if (!why.empty()) std::cout << "  " << why;
    std::cout << std::endl;
}

/// Strips insignificant whitespace from the pretty-printed figure document.
std::string compact_figure_json() {
    std::string out;
    bool in_string = false;
    for (char c : kFigureJson) {
        if (c == '"') in_string = !in_string;
        if (!in_string && (c == ' ' || c == '\n')) continue;
        out.push_back(c);
    }
    return out;
}

std::vector<CommandRecord> stored_records(const CentralStore& store, const std::string& id) {
    std::vector<CommandRecord> out;
    for (const auto& s : store.read(id).records) out.push_back(s.record);
    return out;
}

bool rel_close(double a, double b) {
    return std::fabs(a - b) <= kSummaryRelTol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

// ---- a child `cmdtrace serve` process ---------------------------------------

struct ServeProcess {
    pid_t pid = -1;
    std::uint16_t tcp_port = 0;

    ServeProcess(const std::filesystem::path& store_dir, std::uint16_t port) {
        int fds[2];
        if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
        pid = fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) {
            dup2(fds[1], STDOUT_FILENO);
            close(fds[0]);
            close(fds[1]);
            const auto tcp = "127.0.0.1:" + std::to_string(port);
            const auto dir = store_dir.string();
            execl(CMDTRACE_CLI_PATH, CMDTRACE_CLI_PATH, "serve", "--store-dir", dir.c_str(), "--tcp", tcp.c_str(),
                  "--udp", "off", "--no-api", static_cast<char*>(nullptr));
            _exit(127);
        }
        close(fds[1]);
        std::string line;
        char c = 0;
        while (read(fds[0], &c, 1) == 1 && c != '\n') line.push_back(c);
        close(fds[0]);
        const auto at = line.find("tcp=");
        if (line.rfind("ready ", 0) != 0 || at == std::string::npos) {
            kill9();
            throw std::runtime_error("serve did not report ready: '" + line + "'");
        }
        tcp_port = static_cast<std::uint16_t>(std::stoi(line.substr(at + 4)));
    }

    void kill9() {
        if (pid <= 0) return;
        ::kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        pid = -1;
    }

    void terminate() {
        if (pid <= 0) return;
        ::kill(pid, SIGTERM);
        waitpid(pid, nullptr, 0);
        pid = -1;
    }

    ~ServeProcess() { kill9(); }
};

// ---- criteria ---------------------------------------------------------------

void format_round_trip() {
    const auto from_line = parse_local_line(kFigureLine, std::chrono::minutes(60));
    check(to_canonical_json(from_line) == compact_figure_json(), "line -> JSON differs: " + to_canonical_json(from_line));
    const auto from_json = parse_canonical_json(kFigureJson);
    check(from_json == from_line, "figure JSON parses to a different record");
    check(render_local_line(from_json) == kFigureLine, "JSON -> line differs: " + render_local_line(from_json));
    // The offset is carried by the JSON, so the line renders the local wall time.
    check(format_iso8601(from_json.timestamp) == "2020-07-03T08:09:25+01:00", "timestamp not preserved");
}

void table2_reproduction() {
    TempDir dir("acc2");
    CentralStore store(dir.path());
    CollectorOptions co;
    co.tcp = net::Endpoint{"127.0.0.1", 0};
    co.log = [](std::string_view) {};
    Collector collector(store, co);
    collector.start();
    const auto trace = load_trace(testsupport::table2_trace_path());
    ReplayOptions ro;
    ro.sender.dest = net::Endpoint{"127.0.0.1", collector.tcp_port()};
    const auto report = replay_trace(trace, ro);
    collector.stop();
    check(report.sent == 7 && report.failed == 0, "replay sent " + std::to_string(report.sent));

    const auto records = stored_records(store, "1");
    check(records == trace.records, "store content differs from the trace");
    const auto gaps = gap_series(records);
    check(gaps.gaps == std::vector<std::int64_t>{55, 136, 3, 12, 44, 7}, "wrong gap list");
    check(gaps.duration_s == 257, "duration " + std::to_string(gaps.duration_s));
    const auto scenario = load_scenario(testsupport::scenario_path());
    const auto fa = first_action(records, scenario.first_action_options());
    check(fa.cls == FirstActionClass::task_start, std::string("first action ") + std::string(to_string(fa.cls)));
    check(fa.matched_tool == "nmap", "first action tool is not nmap");
}

void statistics_oracle() {
    std::mt19937_64 rng(20200703);
    for (int c = 0; c < 200; ++c) {
        const auto n = 1 + rng() % 60;
        std::vector<double> v(n);
        for (auto& x : v) x = std::ldexp(static_cast<double>(rng() % 4'000'000), -10);
        const auto got = describe(v);
        const auto want = oracle::describe(v);
        check(got && got->n == want.n, "cohort size mismatch");
        check(rel_close(got->min, want.min) && rel_close(got->max, want.max) && rel_close(got->median, want.median) &&
                  rel_close(got->mean, want.mean) && rel_close(got->stdev, want.stdev) &&
                  rel_close(got->total, want.total),
              "summary mismatch in cohort " + std::to_string(c));
    }
    for (int c = 0; c < 100; ++c) {
        const auto n = 3 + rng() % 50;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng() % 8);
            y[i] = static_cast<double>(rng() % 8);
        }
        const auto got = spearman(x, y).rho;
        const auto want = oracle::spearman(x, y);
        check(got.has_value() == want.has_value(), "rho defined-ness mismatch");
        if (got) check(std::fabs(*got - *want) <= kRhoAbsTol, "rho mismatch in vector " + std::to_string(c));
    }
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const auto n = 3 + rng() % 6;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng() % 6);
            y[i] = static_cast<double>(rng() % 6);
        }
        const auto got = spearman(x, y);
        if (!got.rho) continue;
        const double diff = std::fabs(got.p_value.value_or(-1.0) - oracle::exact_p(x, y));
        worst = std::max(worst, diff);
        check(diff <= kPValueAbsTol, "p-value off by " + std::to_string(diff) + " at n=" + std::to_string(n));
    }
}

void spearman_properties() {
    std::mt19937_64 rng(4);
    for (int c = 0; c < 200; ++c) {
        const auto n = 3 + rng() % 80;
        std::vector<double> x(n), y(n);
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += 1.0 + static_cast<double>(rng() % 1000) / 7.0;
            x[i] = acc;
            y[i] = static_cast<double>(rng() % 12);
        }
        std::vector<double> up(n), down(n);
        for (std::size_t i = 0; i < n; ++i) {
            up[i] = std::log(x[i]) * 3.0 + 1.0;
            down[i] = -std::sqrt(x[i]);
        }
        check(spearman(x, up).rho == 1.0, "monotone input did not give exactly 1");
        check(spearman(x, down).rho == -1.0, "anti-monotone input did not give exactly -1");
        const double a = 0.25 + static_cast<double>(rng() % 64), b = static_cast<double>(rng() % 2001) - 1000.0;
        std::vector<double> ax(n), ay(n);
        for (std::size_t i = 0; i < n; ++i) {
            ax[i] = a * x[i] + b;
            ay[i] = a * y[i] + b;
        }
        const auto base = spearman(x, y);
        check(spearman(ax, y).rho == base.rho, "not invariant under an affine map of x");
        check(spearman(x, ay).rho == base.rho, "not invariant under an affine map of y");
        check(spearman(ax, ay).p_value == base.p_value, "p-value changed under affine maps");
    }
}

void detector_corpora() {
    const auto corpus = testsupport::load_corpus();
    std::set<RuleId> fired;
    std::size_t fp = 0, fn = 0;
    for (const auto& p : corpus.positives) {
        std::vector<RuleId> got;
        for (const auto& f : evaluate_session(p.session, corpus.context).first) got.push_back(f.rule_id);
        for (auto r : got) {
            if (std::find(p.expected.begin(), p.expected.end(), r) == p.expected.end()) ++fp;
            fired.insert(r);
        }
        for (auto r : p.expected) {
            if (std::find(got.begin(), got.end(), r) == got.end()) ++fn;
        }
    }
    for (const auto& n : corpus.negatives) fp += evaluate_session(n.session, corpus.context).first.size();
    check(fp == 0 && fn == 0, std::to_string(fp) + " false positives, " + std::to_string(fn) + " false negatives");
    check(fired.size() == kAllRules.size(), "only " + std::to_string(fired.size()) + " of 12 rules fired");
}

void durability() {
    TempDir dir("acc6");
    std::mt19937_64 rng(6);
    Trace trace{testsupport::random_session(rng, "1", 1000)};

    auto server = std::make_unique<ServeProcess>(dir.path(), 0);
    const auto port = server->tcp_port;

    std::atomic<std::size_t> acked{0};
    std::atomic<bool> kill_now{false};
    ReplayOptions ro;
    ro.sender.dest = net::Endpoint{"127.0.0.1", port};
    ro.sender.retry.max_attempts = 0;
    ro.sender.retry.base = 50ms;
    ro.sender.retry.cap = 500ms;
    ro.sender.connect_timeout = 500ms;
    ro.on_result = [&](std::size_t i, const SendResult& r) {
        if (r.status != SendStatus::delivered) return;
        acked = i + 1;
        if (i + 1 == 400) kill_now = true;
    };
    ReplayReport report;
    std::thread sender([&] { report = replay_trace(trace, ro); });

    while (!kill_now && acked < trace.records.size()) std::this_thread::sleep_for(1ms);
    server->kill9();
    const std::size_t acked_at_kill = acked;

    // What a restart finds on disk must include every acknowledged record.
    {
        CentralStore reopened(dir.path(), StoreOptions{false});
        const auto survived = stored_records(reopened, "1");
        check(survived.size() >= acked_at_kill,
              std::to_string(acked_at_kill) + " acknowledged but " + std::to_string(survived.size()) + " on disk");
        check(std::equal(survived.begin(), survived.end(), trace.records.begin()),
              "records on disk after kill are not a prefix of the trace");
    }
    std::this_thread::sleep_for(2s);
    server = std::make_unique<ServeProcess>(dir.path(), port);
    sender.join();
    server->terminate();

    check(report.sent == 1000 && report.failed == 0, "sent " + std::to_string(report.sent) + " failed " +
                                                         std::to_string(report.failed));
    const auto text = testsupport::read_file(dir.path() / "sandbox1.jsonl");
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    check(lines.size() == 1000, std::to_string(lines.size()) + " lines in store");
    check(std::set<std::string>(lines.begin(), lines.end()).size() == 1000, "duplicate lines in store");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        check(parse_canonical_json(lines[i]) == trace.records[i], "line " + std::to_string(i + 1) + " out of order");
    }
    check(acked_at_kill >= 400 && acked_at_kill < 1000, "kill did not land mid-stream");
}

void progress_mapping() {
    const auto scenario = load_scenario(testsupport::scenario_path());
    const auto records = load_trace(testsupport::table2_trace_path()).records;
    const auto g = map_session(records, scenario);
    const auto* scan = g.node("scan");
    check(scan && scan->status == StepStatus::achieved, "scan not achieved");
    check(scan->achieved_seq == 7, "scan achieved by record " + std::to_string(scan->achieved_seq));
    const auto offset = scan->achieved_at->epoch_seconds_floor() - records.front().timestamp.epoch_seconds_floor();
    check(format_minutes_seconds(offset) == "4:17", "scan achieved at " + format_minutes_seconds(offset));
    const bool near_miss = std::any_of(g.errors.begin(), g.errors.end(), [](const ErrorEvent& e) {
        return e.kind == ErrorKind::near_miss && e.seq == 6 && e.evidence.find("--p") != std::string::npos;
    });
    check(near_miss, "the --p near-miss was not recorded");

    const auto empty = map_session({}, scenario);
    check(std::all_of(empty.nodes.begin(), empty.nodes.end(),
                      [](const StepNode& n) { return n.status == StepStatus::pending; }) &&
              empty.errors.empty(),
          "empty session is not all-pending");

    const std::vector<std::pair<std::string, CommandType>> pool{
        {"nmap -sV -p 10000 172.18.1.5", CommandType::bash},
        {"nmap -sV --p 10000 172.18.1.5", CommandType::bash},
        {"nmap 172.18.1.1", CommandType::bash},
        {"search webmin", CommandType::msf},
        {"use exploit/unix/webapp/webmin_show_cgi_exec", CommandType::msf},
        {"set RHOSTS 172.18.1.5", CommandType::msf},
        {"set LHOST 172.18.1.2", CommandType::msf},
        {"run", CommandType::msf},
        {"john --wordlist=/usr/share/wordlists/rockyou.txt hash", CommandType::bash},
        {"ssh -i key user@172.18.1.5", CommandType::bash},
        {"cat notes.txt", CommandType::bash},
    };
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        std::vector<CommandRecord> session = records;
        const auto before = map_session(session, scenario);
        const auto extra = 1 + rng() % 10;
        for (std::size_t k = 0; k < extra; ++k) {
            const auto& [cmd, type] = pool[rng() % pool.size()];
            session.push_back(testsupport::make_record(cmd, 300 + static_cast<std::int64_t>(k) * 11, type));
        }
        const auto after = map_session(session, scenario);
        for (std::size_t s = 0; s < before.nodes.size(); ++s) {
            const auto& b = before.nodes[s];
            const auto& a = after.nodes[s];
            if (b.status != StepStatus::achieved) continue;  // omitted may still be achieved later
            check(a.status == b.status && a.achieved_seq == b.achieved_seq,
                  "step " + b.step_id + " changed under extension " + std::to_string(i));
        }
        check(after.errors.size() >= before.errors.size(), "errors lost under extension");
        for (std::size_t e = 0; e < before.errors.size(); ++e) {
            check(after.errors[e].seq == before.errors[e].seq && after.errors[e].kind == before.errors[e].kind,
                  "error history rewritten under extension");
        }
    }
}

void stream_consistency() {
    TempDir dir("acc8");
    testsupport::Stack stack(dir.path(), load_scenario(testsupport::scenario_path()));
    testsupport::SseClient client(stack.server->port(), "/stream");
    check(client.wait_connected(), "stream did not open");

    std::mt19937_64 rng(8);
    const std::vector<std::string> sandboxes{"1", "2"};
    std::vector<std::thread> senders;
    std::atomic<std::size_t> failed{0};
    for (const auto& sid : sandboxes) {
        Trace t{testsupport::random_session(rng, sid, 500)};
        senders.emplace_back([&, t = std::move(t)] {
            ReplayOptions ro;
            ro.sender.dest = net::Endpoint{"127.0.0.1", stack.collector->tcp_port()};
            failed += replay_trace(t, ro).failed;
        });
    }
    for (auto& s : senders) s.join();
    check(failed == 0, std::to_string(failed.load()) + " records failed to send");

    const auto commands = [](const std::vector<testsupport::SseEvent>& ev) {
        return std::count_if(ev.begin(), ev.end(), [](const auto& e) { return e.event == "command"; });
    };
    client.wait_until([&](const auto& ev) { return commands(ev) >= 1000; }, 30s);
    std::map<std::string, std::vector<std::uint64_t>> seqs;
    for (const auto& e : client.events()) {
        if (e.event != "command") continue;
        const auto colon = e.id.find(':');
        seqs[e.id.substr(0, colon)].push_back(std::stoull(e.id.substr(colon + 1)));
    }
    for (const auto& sid : sandboxes) {
        const auto& got = seqs[sid];
        check(got.size() == 500, "sandbox " + sid + " received " + std::to_string(got.size()) + " events");
        for (std::size_t i = 0; i < got.size(); ++i) {
            check(got[i] == i + 1, "sandbox " + sid + " event " + std::to_string(i) + " has seq " +
                                       std::to_string(got[i]));
        }
    }
}

}  // namespace

int main() {
    std::signal(SIGPIPE, SIG_IGN);
    criterion(1, "format round-trip of the figure line and JSON", kBudget1, format_round_trip);
    criterion(2, "Table II end-to-end gaps, duration and first action", kBudget2, table2_reproduction);
    criterion(3, "statistics agree with brute-force oracles", kBudget3, statistics_oracle);
    criterion(4, "Spearman monotone and affine properties", std::chrono::hours(1), spearman_properties);
    criterion(5, "detector corpora: 12 rules, no false positives or negatives", kBudget5, detector_corpora);
    criterion(6, "1000-record replay across kill -9 and a 2 s outage", kBudget6, durability);
    criterion(7, "progress mapping of Table II, empty session and extensions", std::chrono::hours(1),
              progress_mapping);
    criterion(8, "stream subscriber sees seqs 1..500 per sandbox", std::chrono::hours(1), stream_consistency);
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
