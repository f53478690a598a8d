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

// Read-only HTTP API over the central store plus a server-sent-events
// stream of commits:
//
//   GET /api/sandboxes
//   GET /api/sandboxes/{id}/commands?since=SEQ|ISO-TIME
//   GET /api/sandboxes/{id}/findings
//   GET /api/sandboxes/{id}/progress
//   GET /api/sandboxes/{id}/timeline?filter=all|correct|erroneous|neutral
//   GET /api/stats
//   GET /stream?sandbox=ID|all
//
// Stream events carry `event:` command, step or finding. On a per-sandbox
// stream `id:` is the sequence number of the command, and a reconnect with
// Last-Event-ID resumes right after it. On the combined stream the id is
// `SANDBOX:SEQ` and reconnects start live.

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cmdtrace/broadcast.hpp"
#include "cmdtrace/live.hpp"
#include "cmdtrace/net.hpp"
#include "cmdtrace/store.hpp"

namespace cmdtrace {

struct ApiOptions {
    net::Endpoint bind{"127.0.0.1", 8080};  // port 0: ephemeral, see port()
    std::vector<std::string> cors_allow;    // origins, or "*"
    std::chrono::milliseconds heartbeat{15000};
    std::size_t threads = 32;  // every open stream holds one
    std::size_t stream_capacity = 10000;  // events buffered per subscriber
};

class ApiServer {
public:
    ApiServer(const CentralStore& store, Broadcaster& events, const LiveAnalyzer& live, ApiOptions options);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and serves on a background thread. Throws net::NetError.
    void start();
    void stop();

    [[nodiscard]] std::uint16_t port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
};

}  // namespace cmdtrace
