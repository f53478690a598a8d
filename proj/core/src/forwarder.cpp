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

#include "cmdtrace/forwarder.hpp"

#include <stdexcept>

namespace cmdtrace {

Forwarder::Forwarder(ForwarderOptions options) : options_(std::move(options)) {
    if (options_.capacity == 0) throw std::invalid_argument("relay buffer capacity must be positive");
    options_.sender.retry.max_attempts = 0;
    worker_ = std::thread([this] { run(); });
}

Forwarder::~Forwarder() { stop(); }

void Forwarder::enqueue(const CommandRecord& record) {
    auto frame = frame_record(record, options_.frame);
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        if (queue_.size() >= options_.capacity) {
            // The front may be in flight; abort its send so the worker moves on.
            queue_.pop_front();
            ++dropped_;
            abort_current_ = true;
        }
        queue_.push_back(Item{next_id_++, std::move(frame)});
    }
    cv_.notify_all();
}

void Forwarder::run() {
    FrameSender sender(options_.sender);
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        const Item item = queue_.front();
        abort_current_ = false;
        lock.unlock();

        const auto result = sender.send(item.frame, &abort_current_);

        lock.lock();
        if (stopping_) return;
        if (result.status == SendStatus::cancelled) continue;  // evicted while in flight
        if (!queue_.empty() && queue_.front().id == item.id) queue_.pop_front();
        if (result.status == SendStatus::delivered) {
            ++forwarded_;
        } else {
            ++rejected_;
        }
        if (queue_.empty()) idle_cv_.notify_all();
    }
}

bool Forwarder::wait_idle(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return idle_cv_.wait_for(lock, timeout, [&] { return queue_.empty(); });
}

void Forwarder::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
        abort_current_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

ForwarderStats Forwarder::stats() const {
    std::lock_guard lock(mu_);
    return ForwarderStats{forwarded_, dropped_, rejected_, queue_.size()};
}

}  // namespace cmdtrace
