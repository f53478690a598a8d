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

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "cmdtrace/agent.hpp"
#include "cmdtrace/collector.hpp"
#include "cmdtrace/forwarder.hpp"
#include "cmdtrace/sender.hpp"
#include "cmdtrace/store.hpp"
#include "cmdtrace/syslog_frame.hpp"
#include "test_support.hpp"
#include "tls_cert.hpp"

using namespace cmdtrace;
using namespace std::chrono_literals;
using testsupport::make_record;
using testsupport::TempDir;

namespace {

bool wait_for(const std::function<bool()>& pred, std::chrono::milliseconds limit = 5000ms) {
    const auto until = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < until) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

CollectorOptions quiet_collector() {
    CollectorOptions o;
    o.tcp = net::Endpoint{"127.0.0.1", 0};
    o.log = [](std::string_view) {};
    return o;
}

ReplayOptions replay_to(std::uint16_t port, net::Transport transport = net::Transport::tcp) {
    ReplayOptions o;
    o.sender.dest = net::Endpoint{"127.0.0.1", port};
    o.sender.transport = transport;
    return o;
}

std::vector<CommandRecord> stored(const CentralStore& store, const std::string& id) {
    std::vector<CommandRecord> out;
    for (const auto& s : store.read(id).records) out.push_back(s.record);
    return out;
}

}  // namespace

TEST_SUITE("syslog") {
    TEST_CASE("framing round trip keeps timestamp, hostname and payload") {
        const auto r = make_record("nmap --help", 0);
        const auto frame = frame_record(r);
        CHECK(frame.rfind("<134>1 2020-07-03T08:09:25+01:00 attacker cmdlog - - - ", 0) == 0);
        CHECK(ingest_frame(frame) == r);
        // The envelope timestamp wins over the zone offset of the local line.
        CHECK(ingest_frame(frame, IngestOptions{std::chrono::minutes(-300), std::nullopt}) == r);
    }

    TEST_CASE("sub-second timestamps survive framing") {
        auto r = make_record("ls", 0);
        r.timestamp = Timestamp::from_epoch_micros(r.timestamp.epoch_micros() + 123456, r.timestamp.offset);
        CHECK(ingest_frame(frame_record(r)) == r);
    }

    TEST_CASE("HMAC is verified and stripped") {
        const auto r = make_record("john --wordlist=rockyou.txt hash", 3);
        FrameOptions fo;
        fo.hmac_key = "s3cret";
        const auto signed_frame = frame_record(r, fo);
        CHECK(signed_frame.find(" mac=\"") != std::string::npos);
        IngestOptions io;
        io.hmac_key = "s3cret";
        CHECK(ingest_frame(signed_frame, io) == r);
        CHECK(ingest_frame(signed_frame) == r);  // verification is opt-in on the receiver

        auto tampered = signed_frame;
        tampered.replace(tampered.find("rockyou"), 7, "rockyoU");
        CHECK_THROWS_AS(ingest_frame(tampered, io), FrameError);
        CHECK_THROWS_AS(ingest_frame(frame_record(r), io), FrameError);
        io.hmac_key = "other";
        CHECK_THROWS_AS(ingest_frame(signed_frame, io), FrameError);
    }

    TEST_CASE("frame errors are classified") {
        auto kind = [](std::string_view bytes) {
            try {
                ingest_frame(bytes);
            } catch (const FrameError& e) {
                return e.kind();
            }
            FAIL("expected FrameError");
            return FrameErrorKind::malformed_frame;
        };
        CHECK(kind("hello") == FrameErrorKind::malformed_frame);
        CHECK(kind("<999>1 - - - - - - x") == FrameErrorKind::malformed_frame);
        CHECK(kind("<134>1 2020-07-03T08:09:25+01:00 attacker cmdlog - - - not a record") ==
              FrameErrorKind::malformed_payload);
    }

    TEST_CASE("random bytes never escape as anything but FrameError") {
        std::mt19937_64 rng(3);
        const auto base = frame_record(make_record("ls -la", 0));
        for (int i = 0; i < 2000; ++i) {
            auto f = base;
            for (int e = 0; e < 3; ++e) f[rng() % f.size()] = static_cast<char>(rng() % 256);
            try {
                ingest_frame(f);
            } catch (const FrameError&) {
            }
        }
    }
}

TEST_SUITE("store") {
    TEST_CASE("sequence numbers, duplicates and since") {
        TempDir dir("store");
        CentralStore store(dir.path(), StoreOptions{false});
        std::vector<StoredRecord> seen;
        store.add_observer([&](const StoredRecord& s) { seen.push_back(s); });
        for (int i = 0; i < 5; ++i) {
            const auto c = store.commit(make_record("cmd" + std::to_string(i), i * 10));
            CHECK(c.sequence_no == static_cast<std::uint64_t>(i + 1));
            CHECK_FALSE(c.duplicate);
        }
        const auto dup = store.commit(make_record("cmd2", 20));
        CHECK(dup.duplicate);
        CHECK(dup.sequence_no == 3);
        CHECK(seen.size() == 5);

        CHECK(store.read("1").records.size() == 5);
        CHECK(store.read("1", Since::sequence(3)).records.front().seq == 4);
        CHECK(store.read("1", Since::time(make_record("x", 20).timestamp)).records.size() == 3);
        CHECK_FALSE(store.read("2").known);
        CHECK(store.sandboxes() == std::vector<std::string>{"1"});
        CHECK(store.index("1")->record_count == 5);
        CHECK(std::filesystem::exists(dir.path() / "sandbox1.jsonl"));
    }

    TEST_CASE("reopen truncates a torn tail and keeps dedup state") {
        TempDir dir("reopen");
        {
            CentralStore store(dir.path(), StoreOptions{true});
            store.commit(make_record("a", 0));
            store.commit(make_record("b", 1));
        }
        {
            std::ofstream f(dir.path() / "sandbox1.jsonl", std::ios::app);
            f << R"({"timestamp":"2020-07-03T08:09:27+01:00","user)";
        }
        CentralStore store(dir.path(), StoreOptions{true});
        CHECK(store.index("1")->record_count == 2);
        CHECK(store.commit(make_record("b", 1)).duplicate);
        CHECK(store.commit(make_record("c", 2)).sequence_no == 3);
        const auto text = testsupport::read_file(dir.path() / "sandbox1.jsonl");
        CHECK(std::count(text.begin(), text.end(), '\n') == 3);
        CHECK(text.find("\"user\n") == std::string::npos);
    }

    TEST_CASE("a corrupt complete line is reported, not skipped") {
        TempDir dir("corrupt");
        {
            std::ofstream f(dir.path() / "sandbox1.jsonl");
            f << "not json\n";
        }
        try {
            CentralStore store(dir.path());
            FAIL("expected StoreError");
        } catch (const StoreError& e) {
            CHECK(e.kind() == StoreErrorKind::corrupt);
        }
    }

    TEST_CASE("invalid records are refused") {
        TempDir dir("invalid");
        CentralStore store(dir.path(), StoreOptions{false});
        auto r = make_record("ls", 0);
        r.sandbox_id = "../etc";
        CHECK_THROWS(store.commit(r));
    }
}

TEST_SUITE("collector") {
    TEST_CASE("handle_frame outcomes") {
        TempDir dir("handle");
        CentralStore store(dir.path(), StoreOptions{false});
        Collector c(store, quiet_collector());
        const auto frame = frame_record(make_record("ls", 0));
        CHECK(c.handle_frame(frame).outcome == Collector::Outcome::committed);
        CHECK(c.handle_frame(frame).outcome == Collector::Outcome::duplicate);
        CHECK(c.handle_frame("garbage").outcome == Collector::Outcome::malformed_frame);
        CHECK(c.handle_frame("<134>1 - attacker cmdlog - - - x").outcome == Collector::Outcome::malformed_payload);
        const auto s = c.stats();
        CHECK(s.committed == 1);
        CHECK(s.duplicates == 1);
        CHECK(s.malformed_frames == 1);
        CHECK(s.malformed_payloads == 1);
    }

    TEST_CASE("the Table II trace arrives over TCP and UDP") {
        const auto trace = load_trace(testsupport::table2_trace_path());
        REQUIRE(trace.records.size() == 7);
        for (auto transport : {net::Transport::tcp, net::Transport::udp}) {
            TempDir dir("ingest");
            CentralStore store(dir.path(), StoreOptions{false});
            auto opts = quiet_collector();
            opts.udp = net::Endpoint{"127.0.0.1", 0};
            Collector c(store, opts);
            c.start();
            const auto port = transport == net::Transport::tcp ? c.tcp_port() : c.udp_port();
            const auto report = replay_trace(trace, replay_to(port, transport));
            CHECK(report.sent == 7);
            CHECK(report.failed == 0);
            CHECK(wait_for([&] { return store.index("1") && store.index("1")->record_count == 7; }));
            CHECK(stored(store, "1") == trace.records);
            c.stop();
        }
    }

    TEST_CASE("TLS ingest with a verified self-signed certificate") {
        TempDir dir("tls");
        const auto files = testsupport::make_self_signed(dir.path());
        CentralStore store(dir.path() / "store", StoreOptions{false});
        auto opts = quiet_collector();
        opts.tls = net::Endpoint{"127.0.0.1", 0};
        opts.tls_options.cert_file = files.cert.string();
        opts.tls_options.key_file = files.key.string();
        Collector c(store, opts);
        c.start();
        const auto trace = load_trace(testsupport::table2_trace_path());
        auto ro = replay_to(c.tls_port(), net::Transport::tcp_tls);
        ro.sender.tls.ca_file = files.cert.string();
        ro.sender.tls.server_name = "localhost";
        const auto report = replay_trace(trace, ro);
        CHECK(report.failed == 0);
        CHECK(stored(store, "1") == trace.records);

        // An untrusted anchor fails the handshake instead of sending in clear.
        TempDir other("tls2");
        const auto wrong = testsupport::make_self_signed(other.path());
        ro.sender.tls.ca_file = wrong.cert.string();
        ro.sender.retry.max_attempts = 1;
        const auto refused = replay_trace(trace, ro);
        CHECK(refused.failed == 7);
        c.stop();
    }

    TEST_CASE("HMAC-protected collector accepts signed and rejects unsigned frames") {
        TempDir dir("hmac");
        CentralStore store(dir.path(), StoreOptions{false});
        auto opts = quiet_collector();
        opts.ingest.hmac_key = "k";
        Collector c(store, opts);
        c.start();
        const auto trace = load_trace(testsupport::table2_trace_path());
        auto ro = replay_to(c.tcp_port());
        ro.frame.hmac_key = "k";
        CHECK(replay_trace(trace, ro).failed == 0);
        ro.frame.hmac_key.reset();
        const auto unsigned_report = replay_trace(trace, ro);
        CHECK(unsigned_report.failed == 7);  // nak: rejected, not retried
        CHECK(store.index("1")->record_count == 7);
        c.stop();
    }

    TEST_CASE("relay chain reproduces the direct store") {
        TempDir dir("relay");
        const auto trace = load_trace(testsupport::table2_trace_path());

        CentralStore direct(dir.path() / "direct", StoreOptions{false});
        Collector dc(direct, quiet_collector());
        dc.start();
        REQUIRE(replay_trace(trace, replay_to(dc.tcp_port())).failed == 0);

        CentralStore central(dir.path() / "central", StoreOptions{false});
        Collector cc(central, quiet_collector());
        cc.start();
        CentralStore edge(dir.path() / "edge", StoreOptions{false});
        auto eo = quiet_collector();
        ForwarderOptions fo;
        fo.sender.dest = net::Endpoint{"127.0.0.1", cc.tcp_port()};
        eo.relay = fo;
        Collector ec(edge, eo);
        ec.start();
        REQUIRE(replay_trace(trace, replay_to(ec.tcp_port())).failed == 0);
        REQUIRE(ec.relay() != nullptr);
        CHECK(const_cast<Forwarder*>(ec.relay())->wait_idle(5000ms));
        CHECK(ec.relay()->stats().forwarded == 7);
        CHECK(testsupport::read_file(dir.path() / "central" / "sandbox1.jsonl") ==
              testsupport::read_file(dir.path() / "direct" / "sandbox1.jsonl"));
        ec.stop();
        cc.stop();
        dc.stop();
    }
}

TEST_SUITE("forwarder") {
    TEST_CASE("buffer overflow evicts the oldest records") {
        ForwarderOptions fo;
        fo.sender.dest = net::Endpoint{"127.0.0.1", 1};  // nothing listens
        fo.sender.connect_timeout = 100ms;
        fo.capacity = 3;
        Forwarder f(fo);
        for (int i = 0; i < 5; ++i) f.enqueue(make_record("cmd" + std::to_string(i), i));
        const auto s = f.stats();
        CHECK(s.dropped == 2);
        CHECK(s.queued == 3);
        CHECK(s.forwarded == 0);
        CHECK_FALSE(f.wait_idle(50ms));
        f.stop();
    }

    TEST_CASE("records buffered during an outage are delivered afterwards") {
        TempDir dir("outage");
        CentralStore central(dir.path(), StoreOptions{false});
        // Reserve a port, then leave it closed for a while.
        std::uint16_t port = 0;
        {
            Collector probe(central, quiet_collector());
            probe.start();
            port = probe.tcp_port();
            probe.stop();
        }
        ForwarderOptions fo;
        fo.sender.dest = net::Endpoint{"127.0.0.1", port};
        fo.sender.retry.base = 20ms;
        fo.sender.retry.cap = 100ms;
        Forwarder f(fo);
        for (int i = 0; i < 20; ++i) f.enqueue(make_record("cmd" + std::to_string(i), i));
        std::this_thread::sleep_for(300ms);
        auto co = quiet_collector();
        co.tcp->port = port;
        Collector c(central, co);
        c.start();
        CHECK(f.wait_idle(10000ms));
        CHECK(central.index("1")->record_count == 20);
        CHECK(f.stats().dropped == 0);
        f.stop();
        c.stop();
    }
}

TEST_SUITE("agent") {
    TEST_CASE("hook snippet structure and determinism") {
        HookConfig h;
        h.sandbox_id = "1";
        h.destination = net::Endpoint{"10.0.0.2", 514};
        h.source_ip = "10.1.135.83";
        const auto a = emit_hook_snippet(h);
        CHECK(a == emit_hook_snippet(h));
        CHECK(a.find("PS0=") != std::string::npos);
        CHECK(a.find("logger -p 134") != std::string::npos);
        const auto u = a.find("username=");
        const auto src = a.find("src=", u);
        const auto wd = a.find("wd=", src);
        const auto cmd = a.find("cmd=", wd);
        const auto type = a.find(R"(cmd_type=\"bash-command\")", cmd);
        const auto sid = a.find(R"(sid=\"1\")", type);
        CHECK(u != std::string::npos);
        CHECK(src != std::string::npos);
        CHECK(wd != std::string::npos);
        CHECK(cmd != std::string::npos);
        CHECK(type != std::string::npos);
        CHECK(sid != std::string::npos);

        h.facility_priority = 200;
        CHECK_THROWS_AS(emit_hook_snippet(h), AgentError);
        h.facility_priority = 134;
        h.sandbox_id = "a b";
        CHECK_THROWS_AS(emit_hook_snippet(h), AgentError);
    }

    TEST_CASE("the hook emits a parseable local line in bash") {
        if (std::system("command -v bash >/dev/null 2>&1") != 0) return;
        TempDir dir("hook");
        HookConfig h;
        h.sandbox_id = "7";
        h.destination = net::Endpoint{"127.0.0.1", 514};
        h.source_ip = "10.1.135.83";
        {
            std::ofstream f(dir.path() / "hook.sh");
            f << emit_hook_snippet(h);
        }
        const std::string cmd = R"(echo "a \"b\" c\d" | grep 'x y')";
        const auto out = dir.path() / "out.txt";
        {
            std::ofstream f(dir.path() / "run.sh");
            f << "logger() { printf '%s\\n' \"${@: -1}\" >> '" << out.string() << "'; }\n"
              << "hostname() { echo attacker; }\n"
              << "source '" << (dir.path() / "hook.sh").string() << "'\n"
              << "cd '" << dir.path().string() << "'\n"
              << "history -s " << "'" << "echo \"a \\\"b\\\" c\\d\" | grep '\\''x y'\\''" << "'\n"
              << "__cmdtrace_log\n";
        }
        REQUIRE(std::system(("bash '" + (dir.path() / "run.sh").string() + "'").c_str()) == 0);
        auto line = testsupport::read_file(out);
        REQUIRE(!line.empty());
        line.pop_back();
        const auto r = parse_local_line(line, {});
        CHECK(r.cmd == cmd);
        CHECK(r.hostname == "attacker");
        CHECK(r.ip == "10.1.135.83");
        CHECK(r.sandbox_id == "7");
        CHECK(r.wd == dir.path().string());
    }

    TEST_CASE("trace loading rejects bad input") {
        std::istringstream unsorted(testsupport::read_file(testsupport::table2_trace_path()));
        auto trace = parse_trace(unsorted);
        std::ostringstream reversed;
        std::reverse(trace.records.begin(), trace.records.end());
        write_trace(reversed, trace);
        std::istringstream in(reversed.str());
        try {
            parse_trace(in);
            FAIL("expected AgentError");
        } catch (const AgentError& e) {
            CHECK(e.kind() == AgentErrorKind::non_monotonic_timestamps);
        }
        std::istringstream again(reversed.str());
        CHECK(parse_trace(again, TraceOptions{true, false}).records.size() == 7);
        std::istringstream broken("{\"timestamp\":1}\n");
        CHECK_THROWS_AS(parse_trace(broken), AgentError);
    }

    TEST_CASE("empty trace replays to nothing") {
        const auto report = replay_trace(Trace{}, replay_to(1));
        CHECK(report.sent == 0);
        CHECK(report.failed == 0);
    }

    TEST_CASE("unreachable destination is reported per record") {
        auto ro = replay_to(1);
        ro.sender.retry.max_attempts = 2;
        ro.sender.retry.base = 1ms;
        ro.sender.connect_timeout = 100ms;
        Trace t;
        t.records.push_back(make_record("ls", 0));
        const auto report = replay_trace(t, ro);
        CHECK(report.failed == 1);
        REQUIRE(report.failures.size() == 1);
        CHECK(report.failures[0].index == 0);
    }
}
