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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmdtrace {

enum class EventKind { command, step, finding };

std::string_view to_string(EventKind kind);

struct StreamEvent {
    EventKind kind = EventKind::command;
    std::string sandbox_id;
    std::uint64_t seq = 0;  // sequence number of the command the event derives from
    std::string data;       // JSON document
};

/// One subscriber's bounded queue. A subscriber that falls `capacity` events
/// behind is disconnected; publishing never blocks.
class Subscription {
public:
    Subscription(std::optional<std::string> sandbox_filter, std::size_t capacity);

    /// Waits up to `timeout`. nullopt on timeout or once closed and drained.
    std::optional<StreamEvent> next(std::chrono::milliseconds timeout);
    [[nodiscard]] bool closed() const;
    [[nodiscard]] bool overflowed() const;
    void close();

private:
    friend class Broadcaster;
    void offer(const StreamEvent& event);

    std::optional<std::string> filter_;
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<StreamEvent> queue_;
    bool closed_ = false;
    bool overflowed_ = false;
};

class Broadcaster {
public:
    explicit Broadcaster(std::size_t default_capacity = 10000) : default_capacity_(default_capacity) {}

    std::shared_ptr<Subscription> subscribe(std::optional<std::string> sandbox_filter = std::nullopt,
                                            std::size_t capacity = 0);
    void publish(const StreamEvent& event);
    void close_all();
    [[nodiscard]] std::size_t subscriber_count() const;

private:
    std::size_t default_capacity_;
    mutable std::mutex mu_;
    std::vector<std::weak_ptr<Subscription>> subs_;
};

}  // namespace cmdtrace
