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

// cmdtrace: collector service, trace replay, hook generator and offline
// analysis in one binary.
//
// Exit codes: 0 success, 1 usage error, 2 data or runtime error.

#include <csignal>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <pthread.h>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmdtrace/agent.hpp"
#include "cmdtrace/api_server.hpp"
#include "cmdtrace/broadcast.hpp"
#include "cmdtrace/collector.hpp"
#include "cmdtrace/config.hpp"
#include "cmdtrace/live.hpp"
#include "cmdtrace/report.hpp"
#include "cmdtrace/scenario.hpp"
#include "cmdtrace/store.hpp"

using namespace cmdtrace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

net::Endpoint endpoint_arg(const std::string& text, const char* what) {
    try {
        return net::Endpoint::parse(text);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string(what) + ": " + e.what());
    }
}

net::Transport transport_arg(const std::string& text) {
    auto t = net::parse_transport(text);
    if (!t) throw UsageError("transport must be udp, tcp or tls");
    return *t;
}

ServiceConfig load_service_config(const std::string& path) {
    return path.empty() ? ServiceConfig{} : load_config(path);
}

ScenarioSpec scenario_or_empty(const std::optional<std::filesystem::path>& path) {
    return path ? load_scenario(*path) : ScenarioSpec{};
}

// ---- serve ------------------------------------------------------------------

struct ServeArgs {
    std::string store_dir;
    std::string scenario;
    std::string api_bind;
    std::string tcp;
    std::string udp;
    std::string tls;
    bool no_api = false;
};

int run_serve(const std::string& config_path, const ServeArgs& a) {
    auto cfg = load_service_config(config_path);
    if (!a.store_dir.empty()) cfg.store_dir = a.store_dir;
    if (!a.scenario.empty()) cfg.api.scenario = a.scenario;
    if (!a.api_bind.empty()) cfg.api.bind = endpoint_arg(a.api_bind, "--api");
    if (a.no_api) cfg.api.bind.reset();
    const auto listener = [](const std::string& text, std::optional<net::Endpoint>& slot, const char* what) {
        if (text == "off") {
            slot.reset();
        } else if (!text.empty()) {
            slot = endpoint_arg(text, what);
        }
    };
    listener(a.tcp, cfg.listen_tcp, "--tcp");
    listener(a.udp, cfg.listen_udp, "--udp");
    listener(a.tls, cfg.listen_tls, "--tls");

    // Signals are taken synchronously by the main thread; every thread
    // started below inherits the mask.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    std::optional<std::string> hmac;
    if (cfg.hmac_key_path) hmac = read_key_file(*cfg.hmac_key_path);

    CentralStore store(cfg.store_dir, StoreOptions{cfg.fsync});
    Broadcaster events;
    LiveAnalyzer live(events, scenario_or_empty(cfg.api.scenario));
    live.attach(store);

    CollectorOptions co;
    co.udp = cfg.listen_udp;
    co.tcp = cfg.listen_tcp;
    co.tls = cfg.listen_tls;
    co.tls_options = cfg.tls;
    co.ingest = IngestOptions{cfg.zone_offset, hmac};
    co.acks = cfg.acks;
    if (cfg.relay) {
        ForwarderOptions fo;
        fo.sender.dest = cfg.relay->upstream;
        fo.sender.transport = cfg.relay->transport;
        fo.sender.tls = cfg.tls;
        fo.frame.hmac_key = hmac;
        fo.capacity = cfg.relay->buffer_capacity;
        co.relay = fo;
    }
    Collector collector(store, co);
    collector.start();

    std::unique_ptr<ApiServer> api;
    if (cfg.api.bind) {
        ApiOptions ao;
        ao.bind = *cfg.api.bind;
        ao.cors_allow = cfg.api.cors_allow;
        ao.heartbeat = cfg.api.heartbeat;
        api = std::make_unique<ApiServer>(store, events, live, ao);
        api->start();
    }

    // One machine-readable line so scripts can find ephemeral ports.
    std::cout << "ready tcp=" << collector.tcp_port() << " udp=" << collector.udp_port()
              << " tls=" << collector.tls_port() << " api=" << (api ? api->port() : 0) << " store=" << store.root().string()
              << std::endl;

    int sig = 0;
    sigwait(&sigs, &sig);
    std::cerr << "cmdtrace: signal " << sig << ", shutting down\n";
    if (api) api->stop();
    events.close_all();
    collector.stop();
    return kExitOk;
}

// ---- replay -----------------------------------------------------------------

struct ReplayArgs {
    std::string trace;
    std::string dest = "127.0.0.1:5514";
    std::string transport = "tcp";
    std::string speed = "max";
    std::string ca_file;
    std::string hmac_key_path;
    bool allow_unsorted = false;
    int max_attempts = 10;
};

int run_replay(const ReplayArgs& a) {
    ReplayOptions o;
    o.sender.dest = endpoint_arg(a.dest, "--dest");
    o.sender.transport = transport_arg(a.transport);
    o.sender.tls.ca_file = a.ca_file;
    o.sender.retry.max_attempts = a.max_attempts;
    if (a.speed == "max") {
        o.speed = std::numeric_limits<double>::infinity();
    } else {
        try {
            o.speed = std::stod(a.speed);
        } catch (const std::exception&) {
            throw UsageError("--speed must be a positive number or 'max'");
        }
        if (!(o.speed > 0.0)) throw UsageError("--speed must be a positive number or 'max'");
    }
    if (!a.hmac_key_path.empty()) o.frame.hmac_key = read_key_file(a.hmac_key_path);
    std::signal(SIGPIPE, SIG_IGN);

    const auto trace = load_trace(a.trace, TraceOptions{a.allow_unsorted, true});
    const auto report = replay_trace(trace, o);
    std::cout << "sent " << report.sent << " failed " << report.failed << " wall "
              << std::chrono::duration<double>(report.wall_time).count() << " s\n";
    for (const auto& f : report.failures) std::cerr << "record " << f.index + 1 << ": " << f.error << '\n';
    return report.failed == 0 ? kExitOk : kExitData;
}

// ---- hook -------------------------------------------------------------------

struct HookArgs {
    std::string sid;
    std::string dest = "127.0.0.1:5514";
    std::string transport = "udp";
    std::string src_ip;
    int pri = kDefaultPri;
};

int run_hook(const HookArgs& a) {
    HookConfig h;
    h.sandbox_id = a.sid;
    h.destination = endpoint_arg(a.dest, "--dest");
    h.transport = transport_arg(a.transport);
    h.source_ip = a.src_ip;
    h.facility_priority = a.pri;
    try {
        std::cout << emit_hook_snippet(h);
    } catch (const AgentError& e) {
        throw UsageError(e.what());
    }
    return kExitOk;
}

// ---- analyze / report ------------------------------------------------------

struct AnalyzeArgs {
    std::string store_dir;
    std::string scenario;
    std::vector<std::string> reports;
    bool json = false;
    std::string format = "text";
    std::string output;
};

CohortReport load_report(const std::string& config_path, const AnalyzeArgs& a) {
    auto cfg = load_service_config(config_path);
    std::filesystem::path dir = a.store_dir.empty() ? cfg.store_dir : std::filesystem::path(a.store_dir);
    if (!std::filesystem::is_directory(dir)) throw StoreError(StoreErrorKind::io, "no store at " + dir.string());
    std::optional<std::filesystem::path> scenario = cfg.api.scenario;
    if (!a.scenario.empty()) scenario = a.scenario;
    const CentralStore store(dir, StoreOptions{false});
    return build_report(store.snapshot(), scenario_or_empty(scenario));
}

void write_out(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!(out << text)) throw StoreError(StoreErrorKind::io, "cannot write " + path);
}

int run_analyze(const std::string& config_path, const AnalyzeArgs& a) {
    std::set<ReportSection> sections;
    for (const auto& r : a.reports) {
        auto s = parse_report_section(r);
        if (!s) throw UsageError("unknown report '" + r + "'");
        sections.insert(*s);
    }
    if (sections.empty()) sections = {ReportSection::stats, ReportSection::gaps};
    const auto report = load_report(config_path, a);
    if (a.json && sections == std::set{ReportSection::findings}) {
        write_out(a.output, findings_jsonl(report.findings));
    } else {
        write_out(a.output, a.json ? render_json(report, sections) : render_text(report, sections));
    }
    return kExitOk;
}

int run_report(const std::string& config_path, const AnalyzeArgs& a) {
    if (a.format != "text" && a.format != "json") throw UsageError("--format must be text or json");
    const auto report = load_report(config_path, a);
    write_out(a.output, a.format == "json" ? render_json(report) : render_text(report));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cmdtrace: command-line activity logging for cybersecurity training"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON service configuration")->envname("CMDTRACE_CONFIG");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "run the collector and the HTTP API");
    serve_cmd->add_option("--store-dir", serve.store_dir, "central store directory");
    serve_cmd->add_option("--scenario", serve.scenario, "scenario file for live progress");
    serve_cmd->add_option("--api", serve.api_bind, "HTTP API address host:port");
    serve_cmd->add_flag("--no-api", serve.no_api, "do not start the HTTP API");
    serve_cmd->add_option("--tcp", serve.tcp, "TCP listener host:port, or off");
    serve_cmd->add_option("--udp", serve.udp, "UDP listener host:port, or off");
    serve_cmd->add_option("--tls", serve.tls, "TLS listener host:port, or off");

    ReplayArgs replay;
    auto* replay_cmd = app.add_subcommand("replay", "send a recorded trace to a collector");
    replay_cmd->add_option("--trace", replay.trace, "JSON-lines trace")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--dest", replay.dest, "collector host:port")->capture_default_str();
    replay_cmd->add_option("--transport", replay.transport, "udp, tcp or tls")->capture_default_str();
    replay_cmd->add_option("--speed", replay.speed, "speed-up factor or 'max'")->capture_default_str();
    replay_cmd->add_option("--ca-file", replay.ca_file, "trust anchor for tls");
    replay_cmd->add_option("--hmac-key-path", replay.hmac_key_path, "sign frames with this key");
    replay_cmd->add_option("--max-attempts", replay.max_attempts, "send attempts per record, 0 = unlimited")
        ->capture_default_str();
    replay_cmd->add_flag("--allow-unsorted", replay.allow_unsorted, "sort the trace instead of rejecting it");

    HookArgs hook;
    auto* hook_cmd = app.add_subcommand("hook", "print the Bash hook for a sandbox host");
    hook_cmd->add_option("--sid", hook.sid, "sandbox id")->required();
    hook_cmd->add_option("--dest", hook.dest, "collector host:port")->capture_default_str();
    hook_cmd->add_option("--transport", hook.transport, "udp or tcp")->capture_default_str();
    hook_cmd->add_option("--src-ip", hook.src_ip, "management address of the host")->required();
    hook_cmd->add_option("--pri", hook.pri, "Syslog PRI value")->capture_default_str();

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "print selected analyses of a store");
    analyze_cmd->add_option("--store-dir", analyze.store_dir, "central store directory");
    analyze_cmd->add_option("--scenario", analyze.scenario, "scenario file");
    analyze_cmd->add_option("--report", analyze.reports, "stats, gaps, first, freq, findings or progress");
    analyze_cmd->add_flag("--json", analyze.json, "JSON output (findings alone: JSON lines)");
    analyze_cmd->add_option("--output", analyze.output, "write to a file instead of stdout");

    AnalyzeArgs report;
    auto* report_cmd = app.add_subcommand("report", "full cohort report");
    report_cmd->add_option("--store-dir", report.store_dir, "central store directory");
    report_cmd->add_option("--scenario", report.scenario, "scenario file");
    report_cmd->add_option("--format", report.format, "text or json")->capture_default_str();
    report_cmd->add_option("--output", report.output, "write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (serve_cmd->parsed()) return run_serve(config_path, serve);
        if (replay_cmd->parsed()) return run_replay(replay);
        if (hook_cmd->parsed()) return run_hook(hook);
        if (analyze_cmd->parsed()) return run_analyze(config_path, analyze);
        if (report_cmd->parsed()) return run_report(config_path, report);
    } catch (const UsageError& e) {
        std::cerr << "cmdtrace: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "cmdtrace: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
