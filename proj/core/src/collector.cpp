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

#include "cmdtrace/collector.hpp"

#include <iostream>

#include "cmdtrace/sender.hpp"

namespace cmdtrace {

namespace {

constexpr std::chrono::milliseconds kPoll{200};
constexpr std::chrono::milliseconds kHandshakeTimeout{5000};

// Reasons go back to the sender on one line.
std::string one_line(std::string_view s) {
    std::string out(s.substr(0, 200));
    for (auto& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

}  // namespace

struct Collector::Connection {
    std::unique_ptr<net::Stream> stream;
    std::mutex mu;  // guards stream against concurrent shutdown
    std::thread thread;
    std::atomic<bool> done{false};
};

Collector::Collector(CentralStore& store, CollectorOptions options) : store_(store), options_(std::move(options)) {
    if (options_.relay) {
        forwarder_ = std::make_shared<Forwarder>(*options_.relay);
        // The store may outlive this collector.
        store_.add_observer([weak = std::weak_ptr<Forwarder>(forwarder_)](const StoredRecord& stored) {
            if (auto fwd = weak.lock()) fwd->enqueue(stored.record);
        });
    }
}

Collector::~Collector() {
    stop();
    if (forwarder_) forwarder_->stop();
}

void Collector::log(std::string_view message) const {
    if (options_.log) {
        options_.log(message);
    } else {
        std::cerr << "cmdtrace: " << message << '\n';
    }
}

void Collector::start() {
    if (running_.exchange(true)) return;
    net::ignore_sigpipe();
    try {
        if (options_.udp) {
            udp_ = std::make_unique<net::UdpListener>(*options_.udp);
            udp_port_ = udp_->port();
        }
        if (options_.tcp) {
            tcp_ = std::make_unique<net::TcpListener>(*options_.tcp);
            tcp_port_ = tcp_->port();
        }
        if (options_.tls) {
            tls_server_ = std::make_unique<net::TlsServer>(options_.tls_options);
            tls_listener_ = std::make_unique<net::TcpListener>(*options_.tls);
            tls_port_ = tls_listener_->port();
        }
    } catch (...) {
        running_ = false;
        udp_.reset();
        tcp_.reset();
        tls_listener_.reset();
        throw;
    }
    if (udp_) loops_.emplace_back([this] { udp_loop(); });
    if (tcp_) loops_.emplace_back([this] { accept_loop(*tcp_, false); });
    if (tls_listener_) loops_.emplace_back([this] { accept_loop(*tls_listener_, true); });
}

void Collector::stop() {
    if (!running_.exchange(false)) return;
    for (auto& t : loops_) t.join();
    loops_.clear();
    std::list<std::shared_ptr<Connection>> conns;
    {
        std::lock_guard lock(conns_mu_);
        conns.swap(conns_);
    }
    for (auto& c : conns) {
        std::lock_guard lock(c->mu);
        if (c->stream) c->stream->shutdown();
    }
    for (auto& c : conns) {
        if (c->thread.joinable()) c->thread.join();
    }
    udp_.reset();
    tcp_.reset();
    tls_listener_.reset();
}

CollectorStats Collector::stats() const {
    return CollectorStats{frames_.load(),           committed_.load(),          duplicates_.load(),
                          malformed_frames_.load(), malformed_payloads_.load(), store_errors_.load()};
}

Collector::IngestResult Collector::handle_frame(std::string_view bytes) {
    ++frames_;
    CommandRecord record;
    try {
        record = ingest_frame(bytes, options_.ingest);
    } catch (const FrameError& e) {
        if (e.kind() == FrameErrorKind::malformed_frame) {
            ++malformed_frames_;
            log(std::string("malformed frame: ") + e.what());
            return {Outcome::malformed_frame, e.what()};
        }
        ++malformed_payloads_;
        log(std::string("malformed payload: ") + e.what());
        return {Outcome::malformed_payload, e.what()};
    }
    try {
        const auto res = store_.commit(record);
        if (res.duplicate) {
            ++duplicates_;
            return {Outcome::duplicate, {}};
        }
        ++committed_;
        return {Outcome::committed, {}};
    } catch (const StoreError& e) {
        ++store_errors_;
        log(std::string("store: ") + e.what());
        return {Outcome::store_error, e.what()};
    }
}

void Collector::udp_loop() {
    while (running_) {
        std::optional<std::string> datagram;
        try {
            datagram = udp_->receive(kPoll);
        } catch (const std::exception& e) {
            log(std::string("udp: ") + e.what());
            continue;
        }
        if (datagram) handle_frame(*datagram);
    }
}

void Collector::reap_finished() {
    std::lock_guard lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
        if ((*it)->done) {
            (*it)->thread.join();
            it = conns_.erase(it);
        } else {
            ++it;
        }
    }
}

void Collector::accept_loop(net::TcpListener& listener, bool tls) {
    while (running_) {
        reap_finished();
        std::optional<net::Socket> sock;
        try {
            sock = listener.accept(kPoll);
        } catch (const std::exception& e) {
            log(std::string("accept: ") + e.what());
            continue;
        }
        if (!sock) continue;
        auto conn = std::make_shared<Connection>();
        auto raw = std::make_shared<net::Socket>(std::move(*sock));
        if (!tls) conn->stream = net::plain_stream(std::move(*raw));
        std::lock_guard lock(conns_mu_);
        if (!running_) return;
        conns_.push_back(conn);
        conn->thread = std::thread([this, conn, tls, raw] {
            if (tls) {
                try {
                    auto stream = tls_server_->handshake(std::move(*raw), kHandshakeTimeout);
                    std::lock_guard l(conn->mu);
                    conn->stream = std::move(stream);
                } catch (const std::exception& e) {
                    log(std::string("tls handshake: ") + e.what());
                    conn->done = true;
                    return;
                }
            }
            serve_connection(conn, tls);
            conn->done = true;
        });
    }
}

void Collector::serve_connection(const std::shared_ptr<Connection>& conn, bool tls) {
    net::Stream& stream = *conn->stream;
    net::StreamReader reader(stream);
    std::string frame;
    while (running_) {
        net::StreamReader::Status st;
        try {
            st = reader.read_octet_frame(frame, kPoll);
        } catch (const std::exception& e) {
            log(std::string(tls ? "tls" : "tcp") + " read: " + e.what());
            return;
        }
        if (st == net::StreamReader::Status::timeout) continue;
        if (st == net::StreamReader::Status::eof) return;
        if (st == net::StreamReader::Status::malformed) {
            // Framing is lost; nothing after this point can be trusted.
            ++frames_;
            ++malformed_frames_;
            log("malformed octet count; closing connection");
            if (options_.acks) {
                try {
                    stream.write_all(std::string(kNakPrefix) + " bad octet count\n");
                } catch (const std::exception&) {
                }
            }
            return;
        }
        const auto result = handle_frame(frame);
        if (result.outcome == Outcome::store_error) {
            // No reply: the sender times out and resends once storage recovers.
            return;
        }
        if (!options_.acks) continue;
        std::string reply;
        if (result.outcome == Outcome::committed || result.outcome == Outcome::duplicate) {
            reply = std::string(kAckLine) + "\n";
        } else {
            reply = std::string(kNakPrefix) + " " + one_line(result.detail) + "\n";
        }
        try {
            stream.write_all(reply);
        } catch (const std::exception& e) {
            log(std::string("reply: ") + e.what());
            return;
        }
    }
}

}  // namespace cmdtrace
