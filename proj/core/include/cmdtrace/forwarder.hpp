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

// Relay mode: committed records are re-framed and pushed to an upstream
// collector. While the upstream is unreachable records wait in a bounded
// in-memory buffer; when it overflows the oldest record is dropped.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <thread>

#include "cmdtrace/record.hpp"
#include "cmdtrace/sender.hpp"
#include "cmdtrace/syslog_frame.hpp"

namespace cmdtrace {

inline constexpr std::size_t kDefaultRelayBuffer = 100000;

struct ForwarderOptions {
    SenderOptions sender;  // retry.max_attempts is ignored: the relay never gives up
    FrameOptions frame;
    std::size_t capacity = kDefaultRelayBuffer;
};

struct ForwarderStats {
    std::uint64_t forwarded = 0;
    std::uint64_t dropped = 0;   // evicted by overflow
    std::uint64_t rejected = 0;  // upstream answered nak
    std::size_t queued = 0;      // includes the record in flight
};

class Forwarder {
public:
    explicit Forwarder(ForwarderOptions options);
    ~Forwarder();
    Forwarder(const Forwarder&) = delete;
    Forwarder& operator=(const Forwarder&) = delete;

    /// Never blocks on the network.
    void enqueue(const CommandRecord& record);
    /// True once the buffer drained within `timeout`.
    bool wait_idle(std::chrono::milliseconds timeout);
    void stop();

    [[nodiscard]] ForwarderStats stats() const;

private:
    struct Item {
        std::uint64_t id;
        std::string frame;
    };

    void run();

    ForwarderOptions options_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<Item> queue_;
    std::uint64_t next_id_ = 0;
    std::uint64_t forwarded_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t rejected_ = 0;
    bool stopping_ = false;
    std::atomic<bool> abort_current_{false};
    std::thread worker_;
};

}  // namespace cmdtrace
