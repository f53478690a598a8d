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
#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "cmdtrace/net.hpp"

namespace cmdtrace {

// Collector replies on TCP, one line per received frame, in order:
//   "ack"            committed (or recognised as a duplicate)
//   "nak <reason>"   permanently rejected (malformed); do not resend
// A frame that was not answered before the connection dropped is resent.
inline constexpr std::string_view kAckLine = "ack";
inline constexpr std::string_view kNakPrefix = "nak";

struct RetryPolicy {
    std::chrono::milliseconds base{100};
    std::chrono::milliseconds cap{5000};
    int max_attempts = 10;  // 0 retries forever

    /// Delay after the `attempt`-th failure (1-based): base * 2^(attempt-1), capped.
    [[nodiscard]] std::chrono::milliseconds backoff(int attempt) const;
};

struct SenderOptions {
    net::Endpoint dest;
    net::Transport transport = net::Transport::tcp;
    net::TlsOptions tls;
    RetryPolicy retry;
    std::chrono::milliseconds connect_timeout{2000};
    std::chrono::milliseconds ack_timeout{5000};
};

enum class SendStatus { delivered, rejected, failed, cancelled };

struct SendResult {
    SendStatus status = SendStatus::failed;
    int attempts = 0;
    std::string error;
};

/// Stop-and-wait, at-least-once delivery of Syslog frames. TCP frames are
/// octet-counted and each waits for the collector's ack line; UDP datagrams
/// count as delivered once handed to the kernel.
class FrameSender {
public:
    explicit FrameSender(SenderOptions options);
    ~FrameSender();
    FrameSender(const FrameSender&) = delete;
    FrameSender& operator=(const FrameSender&) = delete;

    SendResult send(std::string_view frame, const std::atomic<bool>* cancel = nullptr);
    void disconnect();

    [[nodiscard]] std::uint64_t reconnects() const { return reconnects_; }
    [[nodiscard]] const SenderOptions& options() const { return options_; }

private:
    void ensure_connected();
    void attempt(std::string_view frame, SendResult& result);

    SenderOptions options_;
    std::unique_ptr<net::Stream> stream_;
    std::unique_ptr<net::StreamReader> reader_;
    std::unique_ptr<net::UdpSender> udp_;
    std::uint64_t reconnects_ = 0;
    bool connected_once_ = false;
};

}  // namespace cmdtrace
