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

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <thread>

#include "cmdtrace/forwarder.hpp"
#include "cmdtrace/net.hpp"
#include "cmdtrace/store.hpp"
#include "cmdtrace/syslog_frame.hpp"

namespace cmdtrace {

inline constexpr std::uint16_t kDefaultPlainPort = 5514;
inline constexpr std::uint16_t kDefaultTlsPort = 6514;

struct CollectorOptions {
    // Port 0 binds an ephemeral port; see the *_port() accessors.
    std::optional<net::Endpoint> udp;
    std::optional<net::Endpoint> tcp;
    std::optional<net::Endpoint> tls;
    net::TlsOptions tls_options;
    IngestOptions ingest;
    bool acks = true;  // answer each TCP frame with an ack/nak line
    std::optional<ForwarderOptions> relay;
    std::function<void(std::string_view)> log;  // defaults to stderr
};

struct CollectorStats {
    std::uint64_t frames = 0;
    std::uint64_t committed = 0;
    std::uint64_t duplicates = 0;
    std::uint64_t malformed_frames = 0;
    std::uint64_t malformed_payloads = 0;
    std::uint64_t store_errors = 0;
};

/// Syslog ingestion front end of a CentralStore. Every accepted frame is
/// parsed, committed and, over TCP, acknowledged only after the commit is
/// durable. Bad frames are counted and logged; they never stop the server.
class Collector {
public:
    Collector(CentralStore& store, CollectorOptions options);
    ~Collector();
    Collector(const Collector&) = delete;
    Collector& operator=(const Collector&) = delete;

    /// Binds all configured listeners; throws net::NetError on bind failure.
    void start();
    void stop();

    [[nodiscard]] std::uint16_t udp_port() const { return udp_port_; }
    [[nodiscard]] std::uint16_t tcp_port() const { return tcp_port_; }
    [[nodiscard]] std::uint16_t tls_port() const { return tls_port_; }
    [[nodiscard]] CollectorStats stats() const;
    [[nodiscard]] const Forwarder* relay() const { return forwarder_.get(); }

    enum class Outcome { committed, duplicate, malformed_frame, malformed_payload, store_error };
    struct IngestResult {
        Outcome outcome;
        std::string detail;
    };
    /// The per-frame path shared by all listeners.
    IngestResult handle_frame(std::string_view bytes);

private:
    struct Connection;

    void udp_loop();
    void accept_loop(net::TcpListener& listener, bool tls);
    void serve_connection(const std::shared_ptr<Connection>& conn, bool tls);
    void reap_finished();
    void log(std::string_view message) const;

    CentralStore& store_;
    CollectorOptions options_;
    std::shared_ptr<Forwarder> forwarder_;
    std::unique_ptr<net::UdpListener> udp_;
    std::unique_ptr<net::TcpListener> tcp_;
    std::unique_ptr<net::TcpListener> tls_listener_;
    std::unique_ptr<net::TlsServer> tls_server_;
    std::uint16_t udp_port_ = 0;
    std::uint16_t tcp_port_ = 0;
    std::uint16_t tls_port_ = 0;

    std::atomic<bool> running_{false};
    std::vector<std::thread> loops_;
    std::mutex conns_mu_;
    std::list<std::shared_ptr<Connection>> conns_;

    std::atomic<std::uint64_t> frames_{0};
    std::atomic<std::uint64_t> committed_{0};
    std::atomic<std::uint64_t> duplicates_{0};
    std::atomic<std::uint64_t> malformed_frames_{0};
    std::atomic<std::uint64_t> malformed_payloads_{0};
    std::atomic<std::uint64_t> store_errors_{0};
};

}  // namespace cmdtrace
