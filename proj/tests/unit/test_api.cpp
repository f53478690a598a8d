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

#include <doctest.h>

#include <random>

#include "json.hpp"

#include "cmdtrace/agent.hpp"
#include "service_stack.hpp"
#include "test_support.hpp"

using namespace cmdtrace;
using nlohmann::json;
using testsupport::SseClient;
using testsupport::SseEvent;
using testsupport::Stack;
using testsupport::TempDir;

namespace {

ScenarioSpec bundled() { return load_scenario(testsupport::scenario_path()); }

void replay(const Stack& s, const std::vector<CommandRecord>& records) {
    ReplayOptions o;
    o.sender.dest = net::Endpoint{"127.0.0.1", s.collector->tcp_port()};
    REQUIRE(replay_trace(Trace{records}, o).failed == 0);
}

json get_json(httplib::Client& cli, const std::string& path, int expect_status = 200) {
    auto res = cli.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect_status);
    CHECK(res->get_header_value("Content-Type").find("application/json") == 0);
    return json::parse(res->body);
}

std::size_t count_kind(const std::vector<SseEvent>& events, const std::string& kind) {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const SseEvent& e) { return e.event == kind; }));
}

}  // namespace

TEST_SUITE("api") {
    TEST_CASE("query endpoints over the Table II session") {
        TempDir dir("api");
        Stack s(dir.path(), bundled());
        replay(s, load_trace(testsupport::table2_trace_path()).records);
        httplib::Client cli("127.0.0.1", s.server->port());

        CHECK(get_json(cli, "/api/sandboxes") == json::array({"1"}));

        const auto all = get_json(cli, "/api/sandboxes/1/commands?since=1970-01-01T00:00:00Z");
        REQUIRE(all.size() == 7);
        for (std::size_t i = 0; i < 7; ++i) CHECK(all[i]["seq"] == i + 1);
        CHECK(all[5]["cmd"] == "nmap -sV --p 10000 172.18.1.5");
        CHECK(get_json(cli, "/api/sandboxes/1/commands?since=5").size() == 2);
        CHECK(get_json(cli, "/api/sandboxes/1/commands").size() == 7);
        CHECK(get_json(cli, "/api/sandboxes/1/commands?since=2020-07-03T08:12:00+01:00").size() == 5);
        CHECK(get_json(cli, "/api/sandboxes/1/commands?since=yesterday", 400).contains("error"));
        CHECK(get_json(cli, "/api/sandboxes/9/commands", 404)["error"] == "unknown sandbox");

        const auto progress = get_json(cli, "/api/sandboxes/1/progress");
        CHECK(progress["scenario"] == "attack-lifecycle");
        CHECK(progress["nodes"][0]["step_id"] == "scan");
        CHECK(progress["nodes"][0]["status"] == "achieved");
        CHECK(progress["nodes"][0]["achieved_seq"] == 7);
        CHECK(progress["edges"].size() == 4);
        bool near_miss = false;
        for (const auto& e : progress["errors"]) near_miss |= e["kind"] == "near-miss" && e["seq"] == 6;
        CHECK(near_miss);

        CHECK(get_json(cli, "/api/sandboxes/1/findings").empty());
        CHECK(get_json(cli, "/api/sandboxes/1/timeline?filter=correct").size() == 2);
        CHECK(get_json(cli, "/api/sandboxes/1/timeline").size() >= 8);
        CHECK(get_json(cli, "/api/sandboxes/1/timeline?filter=sideways", 400).contains("error"));
        CHECK(get_json(cli, "/api/sandboxes/2/progress", 404).contains("error"));

        const auto stats = get_json(cli, "/api/stats");
        CHECK(stats["time"]["sessions"][0]["duration_s"] == 257);
        CHECK(stats.contains("commands"));
        CHECK(stats.contains("first_actions"));

        CHECK(get_json(cli, "/api/nothing-here", 404).contains("error"));
    }

    TEST_CASE("findings endpoint") {
        TempDir dir("apif");
        Stack s(dir.path(), bundled());
        replay(s, {testsupport::make_record("nmap", 0), testsupport::make_record("nmap 172.18.1.6", 3)});
        httplib::Client cli("127.0.0.1", s.server->port());
        const auto f = get_json(cli, "/api/sandboxes/1/findings");
        REQUIRE(f.size() == 2);
        CHECK(f[0]["rule_id"] == "NMAP_NO_TARGET");
        CHECK(f[1]["rule_id"] == "NMAP_TYPO_IP");
        CHECK(f[1]["seq"] == 2);
    }

    TEST_CASE("CORS") {
        TempDir dir("cors");
        ApiOptions o;
        o.cors_allow = {"http://dash.local"};
        Stack s(dir.path(), bundled(), o);
        httplib::Client cli("127.0.0.1", s.server->port());
        auto ok = cli.Get("/api/sandboxes", {{"Origin", "http://dash.local"}});
        REQUIRE(ok);
        CHECK(ok->get_header_value("Access-Control-Allow-Origin") == "http://dash.local");
        auto other = cli.Get("/api/sandboxes", {{"Origin", "http://evil.example"}});
        REQUIRE(other);
        CHECK_FALSE(other->has_header("Access-Control-Allow-Origin"));
        auto pre = cli.Options("/api/sandboxes", {{"Origin", "http://dash.local"}});
        REQUIRE(pre);
        CHECK(pre->status == 204);
        CHECK(pre->get_header_value("Access-Control-Allow-Headers").find("Last-Event-ID") != std::string::npos);
    }

    TEST_CASE("stream delivers every commit in order") {
        TempDir dir("stream");
        Stack s(dir.path(), bundled());
        SseClient all(s.server->port(), "/stream");
        SseClient only1(s.server->port(), "/stream?sandbox=1");
        REQUIRE(all.wait_connected());
        REQUIRE(only1.wait_connected());
        std::mt19937_64 rng(77);
        replay(s, testsupport::random_session(rng, "2", 100));
        CHECK(all.wait_until([](const auto& ev) { return count_kind(ev, "command") >= 100; }));
        std::vector<std::string> ids;
        for (const auto& e : all.events()) {
            if (e.event != "command") continue;
            ids.push_back(e.id);
            CHECK(json::parse(e.data)["sandbox_id"] == "2");
        }
        REQUIRE(ids.size() == 100);
        for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == "2:" + std::to_string(i + 1));
        CHECK(all.saw_retry());
        CHECK(only1.events().empty());
    }

    TEST_CASE("per-sandbox resume from Last-Event-ID") {
        TempDir dir("resume");
        Stack s(dir.path(), bundled());
        replay(s, load_trace(testsupport::table2_trace_path()).records);
        SseClient c(s.server->port(), "/stream?sandbox=1", {{"Last-Event-ID", "5"}});
        REQUIRE(c.wait_connected());
        CHECK(c.wait_until([](const auto& ev) { return count_kind(ev, "command") >= 2 && count_kind(ev, "step") >= 1; }));
        std::vector<std::string> ids;
        for (const auto& e : c.events()) {
            if (e.event == "command") ids.push_back(e.id);
        }
        CHECK(ids == std::vector<std::string>{"6", "7"});

        // Live commits after the backlog continue the sequence.
        replay(s, {testsupport::make_record("ls", 400)});
        CHECK(c.wait_until([](const auto& ev) { return count_kind(ev, "command") >= 3; }));
        CHECK(c.events().back().id == "8");
    }

    TEST_CASE("bad stream requests") {
        TempDir dir("badstream");
        Stack s(dir.path(), bundled());
        httplib::Client cli("127.0.0.1", s.server->port());
        auto bad_id = cli.Get("/stream?sandbox=1", {{"Last-Event-ID", "abc"}});
        REQUIRE(bad_id);
        CHECK(bad_id->status == 400);
        auto bad_sid = cli.Get("/stream?sandbox=../x");
        REQUIRE(bad_sid);
        CHECK(bad_sid->status == 400);
    }

    TEST_CASE("stop closes open streams promptly") {
        TempDir dir("stop");
        auto s = std::make_unique<Stack>(dir.path(), bundled());
        SseClient c(s->server->port(), "/stream");
        REQUIRE(c.wait_connected());
        const auto t0 = std::chrono::steady_clock::now();
        s.reset();
        CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(3));
    }
}
