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

#include "cmdtrace/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>

#include "text_util.hpp"

namespace cmdtrace::net {

namespace {

std::string errno_text(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

std::string ssl_error_text(const char* what) {
    std::string out(what);
    while (unsigned long e = ERR_get_error()) {
        char buf[256];
        ERR_error_string_n(e, buf, sizeof buf);
        out += ": ";
        out += buf;
    }
    return out;
}

sockaddr_in resolve(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    const std::string host = ep.host.empty() || ep.host == "*" ? "0.0.0.0" : ep.host;
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
        throw NetError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

std::uint16_t local_port(int fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw NetError(errno_text("getsockname"));
    return ntohs(addr.sin_port);
}

// 1 ready, 0 timeout, -1 error
int wait_fd(int fd, short events, std::chrono::milliseconds timeout) {
    pollfd p{fd, events, 0};
    while (true) {
        int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) return -1;
        return rc == 0 ? 0 : 1;
    }
}

class PlainStream final : public Stream {
public:
    explicit PlainStream(Socket s) : socket_(std::move(s)) {}

    void write_all(std::string_view data) override {
        while (!data.empty()) {
            ssize_t n = ::send(socket_.fd(), data.data(), data.size(), MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw NetError(errno_text("send"));
            }
            data.remove_prefix(static_cast<std::size_t>(n));
        }
    }

    std::optional<std::size_t> read_some(char* buf, std::size_t len, std::chrono::milliseconds timeout) override {
        const int ready = wait_fd(socket_.fd(), POLLIN, timeout);
        if (ready == 0) return std::nullopt;
        if (ready < 0) throw NetError(errno_text("poll"));
        while (true) {
            ssize_t n = ::recv(socket_.fd(), buf, len, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n < 0) throw NetError(errno_text("recv"));
            return static_cast<std::size_t>(n);
        }
    }

    void shutdown() override { ::shutdown(socket_.fd(), SHUT_RDWR); }
    [[nodiscard]] int native_handle() const override { return socket_.fd(); }

private:
    Socket socket_;
};

class TlsStream final : public Stream {
public:
    TlsStream(Socket s, SSL* ssl) : socket_(std::move(s)), ssl_(ssl) {}
    ~TlsStream() override {
        if (ssl_ != nullptr) {
            SSL_shutdown(ssl_);
            SSL_free(ssl_);
        }
    }

    void write_all(std::string_view data) override {
        std::lock_guard lock(mu_);
        while (!data.empty()) {
            std::size_t written = 0;
            if (SSL_write_ex(ssl_, data.data(), data.size(), &written) != 1) {
                throw NetError(ssl_error_text("TLS write failed"));
            }
            data.remove_prefix(written);
        }
    }

    std::optional<std::size_t> read_some(char* buf, std::size_t len, std::chrono::milliseconds timeout) override {
        if (SSL_pending(ssl_) == 0) {
            const int ready = wait_fd(socket_.fd(), POLLIN, timeout);
            if (ready == 0) return std::nullopt;
            if (ready < 0) throw NetError(errno_text("poll"));
        }
        std::lock_guard lock(mu_);
        std::size_t got = 0;
        const int rc = SSL_read_ex(ssl_, buf, len, &got);
        if (rc == 1) return got;
        const int err = SSL_get_error(ssl_, rc);
        if (err == SSL_ERROR_ZERO_RETURN) return 0;
        if (err == SSL_ERROR_WANT_READ || err == SSL_ERROR_WANT_WRITE) return std::nullopt;
        if (err == SSL_ERROR_SYSCALL && ERR_peek_error() == 0) return 0;
        throw NetError(ssl_error_text("TLS read failed"));
    }

    void shutdown() override { ::shutdown(socket_.fd(), SHUT_RDWR); }
    [[nodiscard]] int native_handle() const override { return socket_.fd(); }

private:
    Socket socket_;
    SSL* ssl_;
    std::mutex mu_;
};

Socket connect_tcp(const Endpoint& dest, std::chrono::milliseconds timeout) {
    const auto addr = resolve(dest);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw NetError(errno_text("socket"));
    const int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) throw NetError(errno_text(("connect " + dest.to_string()).c_str()));
    if (rc != 0) {
        const int ready = wait_fd(s.fd(), POLLOUT, timeout);
        if (ready == 0) throw NetError("connect " + dest.to_string() + ": timed out");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (ready < 0 || err != 0) {
            errno = err;
            throw NetError(errno_text(("connect " + dest.to_string()).c_str()));
        }
    }
    ::fcntl(s.fd(), F_SETFL, flags);
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

SSL_CTX* new_client_ctx(const TlsOptions& options) {
    SSL_CTX* ctx = SSL_CTX_new(TLS_client_method());
    if (ctx == nullptr) throw NetError(ssl_error_text("SSL_CTX_new"));
    SSL_CTX_set_min_proto_version(ctx, TLS1_2_VERSION);
    if (!options.ca_file.empty()) {
        if (SSL_CTX_load_verify_locations(ctx, options.ca_file.c_str(), nullptr) != 1) {
            SSL_CTX_free(ctx);
            throw NetError(ssl_error_text("loading CA file"));
        }
        SSL_CTX_set_verify(ctx, SSL_VERIFY_PEER, nullptr);
    } else {
        SSL_CTX_set_verify(ctx, SSL_VERIFY_NONE, nullptr);
    }
    return ctx;
}

bool drive_handshake(SSL* ssl, int fd, bool client, std::chrono::milliseconds timeout) {
    while (true) {
        const int rc = client ? SSL_connect(ssl) : SSL_accept(ssl);
        if (rc == 1) return true;
        const int err = SSL_get_error(ssl, rc);
        if (err == SSL_ERROR_WANT_READ) {
            if (wait_fd(fd, POLLIN, timeout) != 1) return false;
        } else if (err == SSL_ERROR_WANT_WRITE) {
            if (wait_fd(fd, POLLOUT, timeout) != 1) return false;
        } else {
            return false;
        }
    }
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 == text.size()) {
        throw std::invalid_argument("expected HOST:PORT, got '" + std::string(text) + "'");
    }
    const auto port = detail::parse_int<unsigned>(text.substr(colon + 1));
    if (!port || *port > 65535) throw std::invalid_argument("bad port in '" + std::string(text) + "'");
    Endpoint ep{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(*port)};
    if (ep.host.empty()) throw std::invalid_argument("empty host in '" + std::string(text) + "'");
    return ep;
}

std::string Endpoint::to_string() const {
    return host + ':' + std::to_string(port);
}

std::string_view to_string(Transport transport) {
    switch (transport) {
        case Transport::udp: return "udp";
        case Transport::tcp: return "tcp";
        case Transport::tcp_tls: return "tcp-tls";
    }
    return "tcp";
}

std::optional<Transport> parse_transport(std::string_view text) {
    if (text == "udp") return Transport::udp;
    if (text == "tcp") return Transport::tcp;
    if (text == "tcp-tls" || text == "tls") return Transport::tcp_tls;
    return std::nullopt;
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.release();
    }
    return *this;
}

Socket::~Socket() { close(); }

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::unique_ptr<Stream> plain_stream(Socket socket) {
    return std::make_unique<PlainStream>(std::move(socket));
}

std::unique_ptr<Stream> connect_stream(const Endpoint& dest, bool tls, const TlsOptions& options,
                                       std::chrono::milliseconds timeout) {
    ignore_sigpipe();
    Socket s = connect_tcp(dest, timeout);
    if (!tls) return plain_stream(std::move(s));

    SSL_CTX* ctx = new_client_ctx(options);
    SSL* ssl = SSL_new(ctx);
    SSL_CTX_free(ctx);  // the SSL object holds its own reference
    if (ssl == nullptr) throw NetError(ssl_error_text("SSL_new"));
    const std::string sni = options.server_name.empty() ? dest.host : options.server_name;
    SSL_set_tlsext_host_name(ssl, sni.c_str());
    if (!options.ca_file.empty()) SSL_set1_host(ssl, sni.c_str());
    SSL_set_fd(ssl, s.fd());
    const int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    const bool ok = drive_handshake(ssl, s.fd(), true, timeout);
    ::fcntl(s.fd(), F_SETFL, flags);
    if (!ok) {
        const auto msg = ssl_error_text(("TLS handshake with " + dest.to_string() + " failed").c_str());
        SSL_free(ssl);
        throw NetError(msg);
    }
    return std::make_unique<TlsStream>(std::move(s), ssl);
}

StreamReader::Status StreamReader::fill(std::chrono::milliseconds timeout) {
    char buf[16384];
    const auto n = stream_.read_some(buf, sizeof buf, timeout);
    if (!n) return Status::timeout;
    if (*n == 0) return Status::eof;
    buffer_.append(buf, *n);
    return Status::ok;
}

StreamReader::Status StreamReader::read_line(std::string& out, std::chrono::milliseconds timeout) {
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            out.assign(buffer_, 0, nl);
            buffer_.erase(0, nl + 1);
            return Status::ok;
        }
        if (buffer_.size() > max_frame_) return Status::malformed;
        if (auto st = fill(timeout); st != Status::ok) return st;
    }
}

StreamReader::Status StreamReader::read_octet_frame(std::string& out, std::chrono::milliseconds timeout) {
    while (true) {
        const auto sp = buffer_.find(' ');
        if (sp != std::string::npos) {
            const auto len = detail::parse_int<std::size_t>(std::string_view(buffer_).substr(0, sp));
            if (!len || *len > max_frame_ || buffer_[0] == '0') return Status::malformed;
            if (buffer_.size() >= sp + 1 + *len) {
                out.assign(buffer_, sp + 1, *len);
                buffer_.erase(0, sp + 1 + *len);
                return Status::ok;
            }
        } else if (buffer_.size() > 10) {
            return Status::malformed;
        } else {
            for (char c : buffer_) {
                if (!detail::is_digit(c)) return Status::malformed;
            }
        }
        if (auto st = fill(timeout); st != Status::ok) {
            return st == Status::eof && !buffer_.empty() ? Status::malformed : st;
        }
    }
}

std::string octet_count(std::string_view frame) {
    std::string out = std::to_string(frame.size());
    out.push_back(' ');
    out.append(frame);
    return out;
}

UdpSender::UdpSender(const Endpoint& dest) {
    const auto addr = resolve(dest);
    socket_ = Socket(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!socket_.valid()) throw NetError(errno_text("socket"));
    if (::connect(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw NetError(errno_text("udp connect"));
    }
}

void UdpSender::send(std::string_view datagram) {
    while (true) {
        ssize_t n = ::send(socket_.fd(), datagram.data(), datagram.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) throw NetError(errno_text("udp send"));
        if (static_cast<std::size_t>(n) != datagram.size()) throw NetError("udp send truncated");
        return;
    }
}

UdpListener::UdpListener(const Endpoint& bind_to) {
    const auto addr = resolve(bind_to);
    socket_ = Socket(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!socket_.valid()) throw NetError(errno_text("socket"));
    int one = 1;
    ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw NetError(errno_text(("bind udp " + bind_to.to_string()).c_str()));
    }
    port_ = local_port(socket_.fd());
}

std::optional<std::string> UdpListener::receive(std::chrono::milliseconds timeout) {
    if (!socket_.valid()) return std::nullopt;
    const int ready = wait_fd(socket_.fd(), POLLIN, timeout);
    if (ready <= 0) return std::nullopt;
    std::string buf(65536, '\0');
    ssize_t n = ::recv(socket_.fd(), buf.data(), buf.size(), 0);
    if (n < 0) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
}

TcpListener::TcpListener(const Endpoint& bind_to) {
    const auto addr = resolve(bind_to);
    socket_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!socket_.valid()) throw NetError(errno_text("socket"));
    int one = 1;
    ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        throw NetError(errno_text(("bind tcp " + bind_to.to_string()).c_str()));
    }
    if (::listen(socket_.fd(), 128) != 0) throw NetError(errno_text("listen"));
    port_ = local_port(socket_.fd());
}

std::optional<Socket> TcpListener::accept(std::chrono::milliseconds timeout) {
    if (!socket_.valid()) return std::nullopt;
    const int ready = wait_fd(socket_.fd(), POLLIN, timeout);
    if (ready <= 0) return std::nullopt;
    int fd = ::accept4(socket_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return std::nullopt;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
}

TlsServer::TlsServer(const TlsOptions& options) {
    ignore_sigpipe();
    SSL_CTX* ctx = SSL_CTX_new(TLS_server_method());
    if (ctx == nullptr) throw NetError(ssl_error_text("SSL_CTX_new"));
    SSL_CTX_set_min_proto_version(ctx, TLS1_2_VERSION);
    if (SSL_CTX_use_certificate_chain_file(ctx, options.cert_file.c_str()) != 1 ||
        SSL_CTX_use_PrivateKey_file(ctx, options.key_file.c_str(), SSL_FILETYPE_PEM) != 1 ||
        SSL_CTX_check_private_key(ctx) != 1) {
        SSL_CTX_free(ctx);
        throw NetError(ssl_error_text("loading TLS certificate/key"));
    }
    ctx_ = ctx;
}

TlsServer::~TlsServer() {
    SSL_CTX_free(static_cast<SSL_CTX*>(ctx_));
}

std::unique_ptr<Stream> TlsServer::handshake(Socket socket, std::chrono::milliseconds timeout) {
    SSL* ssl = SSL_new(static_cast<SSL_CTX*>(ctx_));
    if (ssl == nullptr) throw NetError(ssl_error_text("SSL_new"));
    SSL_set_fd(ssl, socket.fd());
    const int flags = ::fcntl(socket.fd(), F_GETFL, 0);
    ::fcntl(socket.fd(), F_SETFL, flags | O_NONBLOCK);
    const bool ok = drive_handshake(ssl, socket.fd(), false, timeout);
    ::fcntl(socket.fd(), F_SETFL, flags);
    if (!ok) {
        SSL_free(ssl);
        throw NetError(ssl_error_text("TLS accept failed"));
    }
    return std::make_unique<TlsStream>(std::move(socket), ssl);
}

}  // namespace cmdtrace::net
