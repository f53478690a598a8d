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

// In-process service stack and a small SSE client for API tests.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "cmdtrace/api_server.hpp"
#include "cmdtrace/broadcast.hpp"
#include "cmdtrace/collector.hpp"
#include "cmdtrace/live.hpp"
#include "cmdtrace/scenario.hpp"
#include "cmdtrace/store.hpp"

namespace testsupport {

/// Store, live analysis, TCP collector and API, all on ephemeral ports.
struct Stack {
    Stack(const std::filesystem::path& dir, cmdtrace::ScenarioSpec scenario, cmdtrace::ApiOptions api = {})
        : store(dir, cmdtrace::StoreOptions{false}), live(events, std::move(scenario), [](std::string_view) {}) {
        live.attach(store);
        cmdtrace::CollectorOptions co;
        co.tcp = cmdtrace::net::Endpoint{"127.0.0.1", 0};
        co.log = [](std::string_view) {};
        collector = std::make_unique<cmdtrace::Collector>(store, co);
        collector->start();
        api.bind = cmdtrace::net::Endpoint{"127.0.0.1", 0};
        server = std::make_unique<cmdtrace::ApiServer>(store, events, live, api);
        server->start();
    }
    ~Stack() {
        server->stop();
        collector->stop();
    }

    cmdtrace::CentralStore store;
    cmdtrace::Broadcaster events;
    cmdtrace::LiveAnalyzer live;
    std::unique_ptr<cmdtrace::Collector> collector;
    std::unique_ptr<cmdtrace::ApiServer> server;
};

struct SseEvent {
    std::string id;
    std::string event;
    std::string data;
};

/// Reads an event stream on a background thread until stopped.
class SseClient {
public:
    SseClient(std::uint16_t port, std::string path, httplib::Headers headers = {})
        : cli_(std::make_unique<httplib::Client>("127.0.0.1", port)) {
        cli_->set_read_timeout(std::chrono::seconds(60));
        worker_ = std::thread([this, path = std::move(path), headers = std::move(headers)] {
            auto& cli = *cli_;
            std::string buffer;
            auto res = cli.Get(
                path, headers,
                [this](const httplib::Response& r) {
                    status_ = r.status;
                    cv_.notify_all();
                    return r.status == 200;
                },
                [&](const char* data, std::size_t n) {
                    buffer.append(data, n);
                    for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
                        parse_block(buffer.substr(0, end));
                        buffer.erase(0, end + 2);
                    }
                    return !stop_.load();
                });
            std::lock_guard lock(mu_);
            finished_ = true;
            cv_.notify_all();
        });
    }
    ~SseClient() {
        stop_ = true;
        cli_->stop();  // an idle stream would otherwise hold us until the next heartbeat
        if (worker_.joinable()) worker_.join();
    }

    /// Waits for the response headers; false on timeout.
    bool wait_connected(std::chrono::milliseconds limit = std::chrono::seconds(5)) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, limit, [&] { return status_ != 0 || finished_; }) && status_ == 200;
    }

    /// Waits until `pred(events)` holds or the stream ends.
    bool wait_until(const std::function<bool(const std::vector<SseEvent>&)>& pred,
                    std::chrono::milliseconds limit = std::chrono::seconds(10)) {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, limit, [&] { return pred(events_) || finished_; }) && pred(events_);
    }

    std::vector<SseEvent> events() {
        std::lock_guard lock(mu_);
        return events_;
    }
    bool saw_retry() {
        std::lock_guard lock(mu_);
        return saw_retry_;
    }
    int status() const { return status_; }

private:
    void parse_block(const std::string& block) {
        SseEvent ev;
        bool any = false;
        std::size_t pos = 0;
        while (pos <= block.size()) {
            auto nl = block.find('\n', pos);
            if (nl == std::string::npos) nl = block.size();
            const auto line = block.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.rfind("id: ", 0) == 0) {
                ev.id = line.substr(4);
                any = true;
            } else if (line.rfind("event: ", 0) == 0) {
                ev.event = line.substr(7);
                any = true;
            } else if (line.rfind("data: ", 0) == 0) {
                ev.data += (ev.data.empty() ? "" : "\n") + line.substr(6);
                any = true;
            } else if (line.rfind("retry:", 0) == 0) {
                std::lock_guard lock(mu_);
                saw_retry_ = true;
            }
        }
        if (!any) return;
        std::lock_guard lock(mu_);
        events_.push_back(std::move(ev));
        cv_.notify_all();
    }

    std::unique_ptr<httplib::Client> cli_;
    std::thread worker_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<SseEvent> events_;
    std::atomic<bool> stop_{false};
    std::atomic<int> status_{0};
    bool finished_ = false;
    bool saw_retry_ = false;
};

}  // namespace testsupport
