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

#include "cmdtrace/sender.hpp"

#include <algorithm>
#include <thread>

#include "text_util.hpp"

namespace cmdtrace {

namespace {

class Rejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Sleeps in short slices so a cancel flag is honoured promptly.
bool sleep_cancellable(std::chrono::milliseconds total, const std::atomic<bool>* cancel) {
    const auto deadline = std::chrono::steady_clock::now() + total;
    while (std::chrono::steady_clock::now() < deadline) {
        if (cancel != nullptr && cancel->load()) return false;
        const auto left = deadline - std::chrono::steady_clock::now();
        std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(left, std::chrono::milliseconds(25)));
    }
    return cancel == nullptr || !cancel->load();
}

}  // namespace

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
    auto delay = base;
    for (int i = 1; i < attempt && delay < cap; ++i) delay *= 2;
    return std::min(delay, cap);
}

FrameSender::FrameSender(SenderOptions options) : options_(std::move(options)) {
    net::ignore_sigpipe();
}

FrameSender::~FrameSender() = default;

void FrameSender::disconnect() {
    reader_.reset();
    stream_.reset();
    udp_.reset();
}

void FrameSender::ensure_connected() {
    if (options_.transport == net::Transport::udp) {
        if (!udp_) udp_ = std::make_unique<net::UdpSender>(options_.dest);
        return;
    }
    if (stream_) return;
    stream_ = net::connect_stream(options_.dest, options_.transport == net::Transport::tcp_tls, options_.tls,
                                  options_.connect_timeout);
    reader_ = std::make_unique<net::StreamReader>(*stream_);
    if (connected_once_) ++reconnects_;
    connected_once_ = true;
}

void FrameSender::attempt(std::string_view frame, SendResult& result) {
    ensure_connected();
    if (udp_) {
        udp_->send(frame);
        result.status = SendStatus::delivered;
        return;
    }
    stream_->write_all(net::octet_count(frame));
    std::string line;
    switch (reader_->read_line(line, options_.ack_timeout)) {
        case net::StreamReader::Status::ok: break;
        case net::StreamReader::Status::timeout: throw net::NetError("timed out waiting for ack");
        case net::StreamReader::Status::eof: throw net::NetError("connection closed before ack");
        case net::StreamReader::Status::malformed: throw net::NetError("malformed ack");
    }
    if (line == kAckLine) {
        result.status = SendStatus::delivered;
        return;
    }
    if (detail::starts_with(line, kNakPrefix)) throw Rejected(line);
    throw net::NetError("unexpected reply '" + line + "'");
}

SendResult FrameSender::send(std::string_view frame, const std::atomic<bool>* cancel) {
    SendResult result;
    while (true) {
        if (cancel != nullptr && cancel->load()) {
            result.status = SendStatus::cancelled;
            return result;
        }
        ++result.attempts;
        try {
            attempt(frame, result);
            return result;
        } catch (const Rejected& e) {
            result.status = SendStatus::rejected;
            result.error = e.what();
            return result;
        } catch (const std::exception& e) {
            result.error = e.what();
            disconnect();
        }
        if (options_.retry.max_attempts > 0 && result.attempts >= options_.retry.max_attempts) {
            result.status = SendStatus::failed;
            return result;
        }
        if (!sleep_cancellable(options_.retry.backoff(result.attempts), cancel)) {
            result.status = SendStatus::cancelled;
            return result;
        }
    }
}

}  // namespace cmdtrace
