#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "riskbench/transport.hpp"

namespace riskbench::transport {
namespace {

using namespace std::chrono_literals;

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return static_cast<int>(std::max<long long>(0, left.count()));
}

bool wait_readable(int fd, Clock::time_point deadline) {
    pollfd p{fd, POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc > 0) return true;
        if (rc == 0) return false;
        if (errno != EINTR) return false;
    }
}

/// Reads exactly n bytes; false on EOF, error or (with a deadline) timeout.
bool read_exact(int fd, std::uint8_t* buf, std::size_t n,
                std::optional<Clock::time_point> deadline = std::nullopt) {
    std::size_t got = 0;
    while (got < n) {
        if (deadline && !wait_readable(fd, *deadline)) return false;
        const ssize_t rc = ::recv(fd, buf + got, n - got, 0);
        if (rc > 0) {
            got += static_cast<std::size_t>(rc);
        } else if (rc == 0 || errno != EINTR) {
            return false;
        }
    }
    return true;
}

bool write_all(int fd, std::span<const std::uint8_t> data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t rc = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (rc > 0) {
            sent += static_cast<std::size_t>(rc);
        } else if (rc < 0 && errno != EINTR) {
            return false;
        }
    }
    return true;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

Bytes welcome(std::uint32_t rank, std::uint32_t size, std::uint32_t app_word) {
    ByteWriter w;
    w.magic(kHelloMagic);
    w.u32(kProtocolVersion);
    w.u32(rank);
    w.u32(size);
    w.u32(app_word);
    return w.take();
}

class TcpEndpoint final : public Endpoint {
public:
    TcpEndpoint(std::uint32_t rank, std::uint32_t size, std::uint32_t app_word,
                std::map<std::uint32_t, int> peers)
        : rank_(rank), size_(size) {
        app_word_ = app_word;
        for (auto [peer, fd] : peers) {
            set_nodelay(fd);
            conns_.emplace(peer, std::make_unique<Conn>(fd));
        }
        for (auto& [peer, conn] : conns_) {
            conn->reader = std::thread([this, peer = peer, c = conn.get()] { read_loop(peer, *c); });
        }
    }
    ~TcpEndpoint() override { close(); }

    std::uint32_t rank() const override { return rank_; }
    std::uint32_t size() const override { return size_; }

    void close() override {
        if (closing_.exchange(true)) return;
        for (auto& [peer, conn] : conns_) ::shutdown(conn->fd, SHUT_RDWR);
        for (auto& [peer, conn] : conns_) {
            if (conn->reader.joinable()) conn->reader.join();
            ::close(conn->fd);
        }
        inbox_->close();
    }

protected:
    void deliver(std::uint32_t dest, std::uint32_t tag, std::span<const std::uint8_t> payload) override {
        if (closing_) throw Error(ErrorCode::kState, "endpoint closed");
        const auto it = conns_.find(dest);
        if (it == conns_.end()) {
            throw Error(ErrorCode::kTransport, "no route from rank " + std::to_string(rank_) +
                                                   " to rank " + std::to_string(dest));
        }
        Conn& c = *it->second;
        ByteWriter header;
        header.u32(static_cast<std::uint32_t>(8 + payload.size()));
        header.u32(tag);
        header.u32(rank_);
        std::lock_guard lock(c.write_mu);
        if (c.lost || !write_all(c.fd, header.bytes()) || !write_all(c.fd, payload)) {
            c.lost = true;
            throw PeerLost(dest);
        }
    }

private:
    struct Conn {
        explicit Conn(int f) : fd(f) {}
        int fd;
        std::mutex write_mu;
        std::atomic<bool> lost{false};
        std::thread reader;
    };

    void read_loop(std::uint32_t peer, Conn& c) {
        auto fail = [&](ErrorCode code, const std::string& message) {
            c.lost = true;
            if (closing_) return;
            ::shutdown(c.fd, SHUT_RDWR);
            inbox_->fail(peer, code, message);
        };
        for (;;) {
            std::uint8_t head[4];
            if (!read_exact(c.fd, head, 4)) return fail(ErrorCode::kPeerLost, "");
            if (std::memcmp(head, kHelloMagic.data(), 4) == 0) {
                return fail(ErrorCode::kProtocol, "duplicate hello from rank " + std::to_string(peer));
            }
            const std::uint32_t length = be32(head);
            if (length < 8 || length - 8 > max_payload()) {
                return fail(ErrorCode::kProtocol, "bad frame length " + std::to_string(length) +
                                                      " from rank " + std::to_string(peer));
            }
            std::uint8_t meta[8];
            if (!read_exact(c.fd, meta, 8)) return fail(ErrorCode::kPeerLost, "");
            Frame f;
            f.tag = be32(meta);
            f.source = be32(meta + 4);
            if (f.tag < kName || f.tag > kResult || f.source != peer) {
                return fail(ErrorCode::kProtocol, "malformed frame header from rank " + std::to_string(peer));
            }
            f.payload.resize(length - 8);
            if (!read_exact(c.fd, f.payload.data(), f.payload.size())) {
                return fail(ErrorCode::kPeerLost, "");
            }
            inbox_->push(std::move(f));
        }
    }

    std::uint32_t rank_, size_;
    std::map<std::uint32_t, std::unique_ptr<Conn>> conns_;
    std::atomic<bool> closing_{false};
};

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res)) {
        throw Error(ErrorCode::kTransport, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    return res;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kConfig, "address must be host:port: " + address);
    std::string host = address.substr(0, colon);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    const auto port_text = address.substr(colon + 1);
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port < 0 || port > 65535) {
        throw Error(ErrorCode::kConfig, "bad port in address: " + address);
    }
    return {host, static_cast<std::uint16_t>(port)};
}

Listener::Listener(const std::string& address) {
    const auto [host, port] = parse_address(address);
    addrinfo* res = resolve(host, port, true);
    std::string last_error = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) {
            fd_ = fd;
            break;
        }
        last_error = sys_error("bind " + address);
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw Error(ErrorCode::kTransport, last_error);

    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                              : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Endpoint> Listener::accept(std::size_t n, std::chrono::milliseconds timeout,
                                           std::uint32_t app_word) {
    if (n < 1) throw Error(ErrorCode::kConfig, "need at least one worker");
    const auto deadline = Clock::now() + timeout;
    std::map<std::uint32_t, int> peers;
    auto drop_all = [&] {
        for (auto& [r, fd] : peers) ::close(fd);
    };
    while (peers.size() < n) {
        if (!wait_readable(fd_, deadline)) {
            drop_all();
            throw Error(ErrorCode::kTransport, "only " + std::to_string(peers.size()) + " of " +
                                                   std::to_string(n) + " workers connected before timeout");
        }
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) continue;
        std::uint8_t hello[12];
        const auto hello_deadline = std::min(deadline, Clock::now() + 5s);
        const bool ok = read_exact(fd, hello, sizeof hello, hello_deadline) &&
                        std::memcmp(hello, kHelloMagic.data(), 4) == 0 &&
                        be32(hello + 4) == kProtocolVersion && be32(hello + 8) == kRoleWorker;
        if (!ok) {
            write_all(fd, welcome(0, 0, 0));
            ::close(fd);
            continue;
        }
        peers.emplace(static_cast<std::uint32_t>(peers.size() + 1), fd);
    }
    const auto size = static_cast<std::uint32_t>(n + 1);
    for (auto& [r, fd] : peers) {
        if (!write_all(fd, welcome(r, size, app_word))) {
            drop_all();
            throw Error(ErrorCode::kTransport, "worker " + std::to_string(r) + " vanished during handshake");
        }
    }
    return std::make_unique<TcpEndpoint>(0, size, app_word, std::move(peers));
}

std::unique_ptr<Endpoint> listen(const std::string& address, std::size_t n,
                                 std::chrono::milliseconds timeout, std::uint32_t app_word) {
    Listener l(address);
    return l.accept(n, timeout, app_word);
}

std::unique_ptr<Endpoint> connect(const std::string& address, std::chrono::milliseconds timeout) {
    const auto [host, port] = parse_address(address);
    const auto deadline = Clock::now() + timeout;
    int fd = -1;
    std::string last_error;
    while (fd < 0) {
        addrinfo* res = resolve(host, port, false);
        for (addrinfo* ai = res; ai && fd < 0; ai = ai->ai_next) {
            const int s = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (s < 0) continue;
            if (::connect(s, ai->ai_addr, ai->ai_addrlen) == 0) {
                fd = s;
            } else {
                last_error = sys_error("connect " + address);
                ::close(s);
            }
        }
        ::freeaddrinfo(res);
        if (fd < 0) {
            if (Clock::now() >= deadline) throw Error(ErrorCode::kTransport, last_error);
            std::this_thread::sleep_for(50ms);
        }
    }

    ByteWriter hello;
    hello.magic(kHelloMagic);
    hello.u32(kProtocolVersion);
    hello.u32(kRoleWorker);
    std::uint8_t reply[20];
    if (!write_all(fd, hello.bytes()) || !read_exact(fd, reply, sizeof reply, deadline)) {
        ::close(fd);
        throw Error(ErrorCode::kTransport, "handshake with " + address + " failed or timed out");
    }
    if (std::memcmp(reply, kHelloMagic.data(), 4) != 0) {
        ::close(fd);
        throw Error(ErrorCode::kProtocol, "master sent a malformed welcome");
    }
    const std::uint32_t version = be32(reply + 4), rank = be32(reply + 8), size = be32(reply + 12);
    if (version != kProtocolVersion || rank == 0) {
        ::close(fd);
        throw Error(ErrorCode::kVersionMismatch, "master rejected the hello (master protocol version " +
                                                     std::to_string(version) + ")");
    }
    if (rank >= size) {
        ::close(fd);
        throw Error(ErrorCode::kProtocol, "master assigned an out-of-range rank");
    }
    return std::make_unique<TcpEndpoint>(rank, size, be32(reply + 16), std::map<std::uint32_t, int>{{0, fd}});
}

}  // namespace riskbench::transport
