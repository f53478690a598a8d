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

#include "cmdtrace/broadcast.hpp"

#include <algorithm>

namespace cmdtrace {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::command: return "command";
        case EventKind::step: return "step";
        case EventKind::finding: return "finding";
    }
    return "command";
}

Subscription::Subscription(std::optional<std::string> sandbox_filter, std::size_t capacity)
    : filter_(std::move(sandbox_filter)), capacity_(capacity) {}

void Subscription::offer(const StreamEvent& event) {
    if (filter_ && *filter_ != event.sandbox_id) return;
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        if (queue_.size() >= capacity_) {
            overflowed_ = true;
            closed_ = true;
        } else {
            queue_.push_back(event);
        }
    }
    cv_.notify_all();
}

std::optional<StreamEvent> Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    // An overflowed subscriber has a gap; it gets nothing more.
    if (queue_.empty() || overflowed_) return std::nullopt;
    auto ev = std::move(queue_.front());
    queue_.pop_front();
    return ev;
}

bool Subscription::closed() const {
    std::lock_guard lock(mu_);
    return closed_ && (queue_.empty() || overflowed_);
}

bool Subscription::overflowed() const {
    std::lock_guard lock(mu_);
    return overflowed_;
}

void Subscription::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::shared_ptr<Subscription> Broadcaster::subscribe(std::optional<std::string> sandbox_filter, std::size_t capacity) {
    auto sub = std::make_shared<Subscription>(std::move(sandbox_filter), capacity == 0 ? default_capacity_ : capacity);
    std::lock_guard lock(mu_);
    subs_.push_back(sub);
    return sub;
}

void Broadcaster::publish(const StreamEvent& event) {
    std::lock_guard lock(mu_);
    auto it = subs_.begin();
    while (it != subs_.end()) {
        if (auto sub = it->lock(); sub && !sub->closed()) {
            sub->offer(event);
            ++it;
        } else {
            it = subs_.erase(it);
        }
    }
}

void Broadcaster::close_all() {
    std::lock_guard lock(mu_);
    for (auto& weak : subs_) {
        if (auto sub = weak.lock()) sub->close();
    }
    subs_.clear();
}

std::size_t Broadcaster::subscriber_count() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(subs_.begin(), subs_.end(), [](const auto& w) { return !w.expired(); }));
}

}  // namespace cmdtrace
