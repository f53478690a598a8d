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

// Thin POSIX socket layer: endpoints, plain and TLS byte streams, listeners.

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cmdtrace::net {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// `host:port`; throws std::invalid_argument on malformed input.
    static Endpoint parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

enum class Transport { udp, tcp, tcp_tls };

std::string_view to_string(Transport transport);
std::optional<Transport> parse_transport(std::string_view text);

struct TlsOptions {
    std::string cert_file;  // server: certificate chain (PEM)
    std::string key_file;   // server: private key (PEM)
    std::string ca_file;    // client: trust anchor; empty disables peer verification
    std::string server_name;
};

/// Owning file descriptor.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.release()) {}
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    [[nodiscard]] int fd() const { return fd_; }
    [[nodiscard]] bool valid() const { return fd_ >= 0; }
    int release() {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void close();

private:
    int fd_ = -1;
};

/// A connected, reliable byte stream (plain TCP or TLS over TCP).
class Stream {
public:
    virtual ~Stream() = default;

    /// Throws NetError on failure.
    virtual void write_all(std::string_view data) = 0;
    /// Returns 0 on orderly EOF, nullopt on timeout; throws NetError on failure.
    virtual std::optional<std::size_t> read_some(char* buf, std::size_t len, std::chrono::milliseconds timeout) = 0;
    /// Unblocks pending reads from another thread.
    virtual void shutdown() = 0;
    [[nodiscard]] virtual int native_handle() const = 0;
};

std::unique_ptr<Stream> connect_stream(const Endpoint& dest, bool tls, const TlsOptions& tls_options,
                                       std::chrono::milliseconds timeout);

/// Buffered reader for newline-terminated lines and RFC 6587 octet-counted
/// frames (`LEN SP BYTES`).
class StreamReader {
public:
    explicit StreamReader(Stream& stream, std::size_t max_frame = 1 << 20) : stream_(stream), max_frame_(max_frame) {}

    enum class Status { ok, eof, timeout, malformed };

    Status read_line(std::string& out, std::chrono::milliseconds timeout);
    Status read_octet_frame(std::string& out, std::chrono::milliseconds timeout);

private:
    Status fill(std::chrono::milliseconds timeout);

    Stream& stream_;
    std::size_t max_frame_;
    std::string buffer_;
};

std::string octet_count(std::string_view frame);

class UdpSender {
public:
    explicit UdpSender(const Endpoint& dest);
    void send(std::string_view datagram);

private:
    Socket socket_;
};

class UdpListener {
public:
    explicit UdpListener(const Endpoint& bind_to);
    [[nodiscard]] std::uint16_t port() const { return port_; }
    /// nullopt on timeout.
    std::optional<std::string> receive(std::chrono::milliseconds timeout);
    void close() { socket_.close(); }

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

class TcpListener {
public:
    explicit TcpListener(const Endpoint& bind_to);
    [[nodiscard]] std::uint16_t port() const { return port_; }
    /// nullopt on timeout.
    std::optional<Socket> accept(std::chrono::milliseconds timeout);
    void close() { socket_.close(); }

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

/// Server-side TLS context; wraps accepted sockets into TLS streams.
class TlsServer {
public:
    explicit TlsServer(const TlsOptions& options);
    ~TlsServer();
    TlsServer(const TlsServer&) = delete;
    TlsServer& operator=(const TlsServer&) = delete;

    std::unique_ptr<Stream> handshake(Socket socket, std::chrono::milliseconds timeout);

private:
    void* ctx_ = nullptr;  // SSL_CTX
};

std::unique_ptr<Stream> plain_stream(Socket socket);

/// Process-wide; writes to closed peers must surface as errors, not signals.
void ignore_sigpipe();

}  // namespace cmdtrace::net
