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

#include "cmdtrace/api_server.hpp"

#include <algorithm>
#include <atomic>
#include <list>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "cmdtrace/report.hpp"
#include "json_codec.hpp"
#include "text_util.hpp"

namespace cmdtrace {

namespace {

using detail::ojson;

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const ojson& body, int status = 200) {
    res.status = status;
    res.set_content(detail::dump(body), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view message) {
    send_json(res, detail::error_body(message), status);
}

std::vector<CommandRecord> records_of(const ReadResult& r) {
    std::vector<CommandRecord> out;
    out.reserve(r.records.size());
    for (const auto& s : r.records) out.push_back(s.record);
    return out;
}

std::optional<TimelineFilter> parse_filter(std::string_view text) {
    if (text.empty() || text == "all") return TimelineFilter::all;
    if (text == "correct") return TimelineFilter::correct;
    if (text == "erroneous") return TimelineFilter::erroneous;
    if (text == "neutral") return TimelineFilter::neutral;
    return std::nullopt;
}

std::string sse_frame(const StreamEvent& e, bool combined) {
    std::string out = "id: ";
    out += combined ? e.sandbox_id + ":" + std::to_string(e.seq) : std::to_string(e.seq);
    out += "\nevent: ";
    out += to_string(e.kind);
    out += "\ndata: ";
    out += e.data;  // single-line JSON
    out += "\n\n";
    return out;
}

// State of one open stream, shared between the handler and its provider.
struct StreamState {
    std::shared_ptr<Subscription> sub;
    std::vector<StreamEvent> backlog;
    std::uint64_t skip_through = 0;  // live events already covered by the backlog
    bool combined = false;
    bool preamble_sent = false;
    std::chrono::steady_clock::time_point last_write = std::chrono::steady_clock::now();
};

}  // namespace

struct ApiServer::Impl {
    Impl(const CentralStore& s, Broadcaster& b, const LiveAnalyzer& l, ApiOptions o)
        : store(s), events(b), live(l), options(std::move(o)) {}

    const CentralStore& store;
    Broadcaster& events;
    const LiveAnalyzer& live;
    ApiOptions options;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> stopping{false};
    std::mutex subs_mu;
    std::list<std::weak_ptr<Subscription>> subs;

    void routes();
    void cors(const httplib::Request& req, httplib::Response& res) const;
    void stream(const httplib::Request& req, httplib::Response& res);
    bool pump(StreamState& st, httplib::DataSink& sink);
};

void ApiServer::Impl::cors(const httplib::Request& req, httplib::Response& res) const {
    if (!req.has_header("Origin")) return;
    const auto origin = req.get_header_value("Origin");
    const auto& allow = options.cors_allow;
    const bool any = std::find(allow.begin(), allow.end(), "*") != allow.end();
    if (!any && std::find(allow.begin(), allow.end(), origin) == allow.end()) return;
    res.set_header("Access-Control-Allow-Origin", any ? "*" : origin);
    res.set_header("Vary", "Origin");
}

void ApiServer::Impl::routes() {
    server.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) { cors(req, res); });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
    });
    server.Options(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        cors(req, res);
        res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Last-Event-ID, Content-Type");
        res.status = 204;
    });

    server.Get("/api/sandboxes", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, ojson(store.sandboxes()));
    });

    server.Get("/api/sandboxes/:id/commands", [this](const httplib::Request& req, httplib::Response& res) {
        Since since = Since::beginning();
        if (req.has_param("since")) {
            const auto text = req.get_param_value("since");
            if (auto n = detail::parse_int<std::uint64_t>(text)) {
                since = Since::sequence(*n);
            } else if (auto ts = parse_iso8601(text)) {
                since = Since::time(*ts);
            } else {
                return send_error(res, 400, "since must be a sequence number or an ISO-8601 time");
            }
        }
        const auto r = store.read(req.path_params.at("id"), since);
        if (!r.known) return send_error(res, 404, "unknown sandbox");
        ojson out = ojson::array();
        for (const auto& s : r.records) out.push_back(detail::record_json(s.record, s.seq));
        send_json(res, out);
    });

    server.Get("/api/sandboxes/:id/findings", [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = store.read(req.path_params.at("id"));
        if (!r.known) return send_error(res, 404, "unknown sandbox");
        auto findings = analyze_session(records_of(r), live.scenario()).findings;
        std::stable_sort(findings.begin(), findings.end(),
                         [](const Finding& a, const Finding& b) { return a.seq < b.seq; });
        ojson out = ojson::array();
        for (const auto& f : findings) out.push_back(detail::finding_json(f));
        send_json(res, out);
    });

    server.Get("/api/sandboxes/:id/progress", [this](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto r = store.read(id);
        if (!r.known) return send_error(res, 404, "unknown sandbox");
        auto out = detail::progress_json(id, map_session(records_of(r), live.scenario()));
        const auto& name = live.scenario().name;
        out["scenario"] = live.scenario().steps.empty() ? ojson(nullptr) : ojson(name);
        send_json(res, out);
    });

    server.Get("/api/sandboxes/:id/timeline", [this](const httplib::Request& req, httplib::Response& res) {
        const auto filter = parse_filter(req.has_param("filter") ? req.get_param_value("filter") : "");
        if (!filter) return send_error(res, 400, "filter must be all, correct, erroneous or neutral");
        const auto r = store.read(req.path_params.at("id"));
        if (!r.known) return send_error(res, 404, "unknown sandbox");
        const auto records = records_of(r);
        const auto analysis = analyze_session(records, live.scenario());
        ojson out = ojson::array();
        for (const auto& e : filter_timeline(timeline(records, analysis.findings, analysis.graph), *filter)) {
            out.push_back(detail::timeline_event_json(e));
        }
        send_json(res, out);
    });

    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
        const auto report = build_report(store.snapshot(), live.scenario());
        res.set_content(render_json(report, {ReportSection::stats, ReportSection::gaps, ReportSection::freq,
                                             ReportSection::first}),
                        kJson);
    });

    server.Get("/stream", [this](const httplib::Request& req, httplib::Response& res) { stream(req, res); });
}

void ApiServer::Impl::stream(const httplib::Request& req, httplib::Response& res) {
    const auto which = req.has_param("sandbox") ? req.get_param_value("sandbox") : std::string("all");
    auto st = std::make_shared<StreamState>();
    st->combined = which == "all";
    if (!st->combined && !is_valid_sandbox_id(which)) return send_error(res, 400, "bad sandbox id");

    // Subscribe before reading the backlog so nothing falls in between.
    st->sub = events.subscribe(st->combined ? std::nullopt : std::optional<std::string>(which),
                               options.stream_capacity);
    {
        std::lock_guard lock(subs_mu);
        subs.remove_if([](const auto& w) { return w.expired(); });
        subs.push_back(st->sub);
    }
    const auto last_id = req.has_header("Last-Event-ID") ? req.get_header_value("Last-Event-ID")
                                                         : req.get_param_value("last_event_id");
    if (!st->combined && !last_id.empty()) {
        const auto after = detail::parse_int<std::uint64_t>(last_id);
        if (!after) return send_error(res, 400, "Last-Event-ID must be a sequence number");
        const auto r = store.read(which);
        st->backlog = live.replay(which, records_of(r), *after);
        st->skip_through = std::max<std::uint64_t>(*after,
                                                   r.records.empty() ? 0 : r.records.back().seq);
    }

    res.set_header("Cache-Control", "no-cache");
    res.set_header("X-Accel-Buffering", "no");
    res.set_chunked_content_provider(
        "text/event-stream", [this, st](std::size_t, httplib::DataSink& sink) { return pump(*st, sink); },
        [st](bool) { st->sub->close(); });
}

bool ApiServer::Impl::pump(StreamState& st, httplib::DataSink& sink) {
    const auto write = [&](const std::string& s) {
        st.last_write = std::chrono::steady_clock::now();
        return sink.write(s.data(), s.size());
    };
    if (!st.preamble_sent) {
        st.preamble_sent = true;
        std::string head = "retry: 2000\n\n";
        for (const auto& e : st.backlog) head += sse_frame(e, st.combined);
        st.backlog.clear();
        return write(head);
    }
    // Short waits keep shutdown prompt; heartbeats keep proxies and clients
    // from timing out an idle stream.
    const auto slice = std::min<std::chrono::milliseconds>(options.heartbeat, std::chrono::milliseconds(200));
    while (!stopping) {
        if (auto ev = st.sub->next(slice)) {
            if (!st.combined && ev->seq <= st.skip_through) continue;
            return write(sse_frame(*ev, st.combined));
        }
        if (st.sub->closed()) break;  // overflowed: the client reconnects and resumes
        if (std::chrono::steady_clock::now() - st.last_write >= options.heartbeat) return write(": heartbeat\n\n");
    }
    sink.done();
    return true;
}

ApiServer::ApiServer(const CentralStore& store, Broadcaster& events, const LiveAnalyzer& live, ApiOptions options)
    : impl_(std::make_unique<Impl>(store, events, live, std::move(options))) {
    const auto threads = std::max<std::size_t>(impl_->options.threads, 2);
    impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    impl_->server.set_keep_alive_max_count(100);
    impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
    auto& s = impl_->server;
    const auto& b = impl_->options.bind;
    if (b.port == 0) {
        const int p = s.bind_to_any_port(b.host);
        if (p <= 0) throw net::NetError("cannot bind API on " + b.host);
        port_ = static_cast<std::uint16_t>(p);
    } else {
        if (!s.bind_to_port(b.host, b.port)) throw net::NetError("cannot bind API on " + b.to_string());
        port_ = b.port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    s.wait_until_ready();
}

void ApiServer::stop() {
    if (!impl_->thread.joinable()) return;
    impl_->stopping = true;
    {
        std::lock_guard lock(impl_->subs_mu);
        for (auto& w : impl_->subs) {
            if (auto sub = w.lock()) sub->close();
        }
    }
    impl_->server.stop();
    impl_->thread.join();
}

}  // namespace cmdtrace
