#pragma once

// Rank-addressed, ordered message passing with probe semantics.
//
// Rank 0 is the master; workers are 1..size-1. Two backends share the
// Endpoint interface: an in-process hub (spawn_local) and TCP (listen/connect).
//
// TCP wire format, big-endian:
//   frame      u32 length (bytes that follow: 8 + payload), u32 tag, u32 source, payload
//   hello      "RBW1", u32 protocol version, u32 role (1 = worker)
//   welcome    "RBW1", u32 protocol version, u32 assigned rank (0 = rejected),
//              u32 size, u32 app word

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskbench/byte_io.hpp"

namespace riskbench::transport {

/// Wildcard for source and tag filters.
inline constexpr int kAny = -1;

enum Tag : std::uint32_t { kName = 1, kBlob = 2, kResult = 3 };

inline constexpr std::size_t kDefaultMaxPayload = std::size_t{64} << 20;
inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::string_view kHelloMagic = "RBW1";
inline constexpr std::uint32_t kRoleWorker = 1;
inline constexpr const char* kMasterAddrEnv = "RISKBENCH_MASTER_ADDR";

struct Frame {
    std::uint32_t tag = 0;
    std::uint32_t source = 0;
    Bytes payload;
};

struct ProbeInfo {
    std::uint32_t source = 0;
    std::uint32_t tag = 0;
    std::size_t byte_count = 0;
};

struct Traffic {
    std::atomic<std::uint64_t> frames{0};
    std::atomic<std::uint64_t> payload_bytes{0};
    std::atomic<std::uint64_t> wire_bytes{0};  // payload plus the 12-byte frame header
};

using Clock = std::chrono::steady_clock;

/// Thread-safe receive queue with MPI-style matching. Failures of individual
/// peers are queued alongside frames and reported once each, after every
/// frame that peer delivered before failing.
class Mailbox {
public:
    void push(Frame frame);
    /// Records that `rank` is gone; `code` is kPeerLost or kProtocol.
    void fail(std::uint32_t rank, ErrorCode code, std::string message);
    /// Wakes every waiter; later waits throw kState.
    void close();

    std::optional<ProbeInfo> probe(int source, int tag, std::optional<Clock::time_point> deadline);
    std::optional<Frame> take(int source, int tag, std::optional<Clock::time_point> deadline);

private:
    struct Failure {
        ErrorCode code;
        std::string message;
        bool reported = false;
    };

    std::deque<Frame>::iterator find(int source, int tag);
    /// Throws the pending failure relevant to this filter, if any.
    void raise_failure(int source);
    bool wait(std::unique_lock<std::mutex>& lock, std::optional<Clock::time_point> deadline);

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Frame> frames_;
    std::map<std::uint32_t, Failure> failed_;
    bool closed_ = false;
};

class Endpoint {
public:
    virtual ~Endpoint() = default;
    Endpoint(const Endpoint&) = delete;
    Endpoint& operator=(const Endpoint&) = delete;

    virtual std::uint32_t rank() const = 0;
    virtual std::uint32_t size() const = 0;

    /// Errors: kTransport for an unknown rank or oversized payload, kProtocol
    /// for an unknown tag, PeerLost when the destination is gone.
    void send(std::uint32_t dest, std::uint32_t tag, std::span<const std::uint8_t> payload);

    /// Blocks until a matching frame is queued, without consuming it.
    ProbeInfo probe(int source = kAny, int tag = kAny);
    /// Consumes the earliest matching frame.
    Frame recv(int source = kAny, int tag = kAny);
    /// As above, giving up (nullopt) after `timeout`.
    std::optional<ProbeInfo> probe_for(int source, int tag, std::chrono::milliseconds timeout);
    std::optional<Frame> recv_for(int source, int tag, std::chrono::milliseconds timeout);

    /// Opaque word chosen by the master at connection time (0 in-process).
    std::uint32_t app_word() const { return app_word_; }
    std::size_t max_payload() const { return max_payload_; }
    void set_max_payload(std::size_t bytes) { max_payload_ = bytes; }
    const Traffic& traffic() const { return traffic_; }

    /// Disconnects; peers observe PeerLost for this rank. Idempotent.
    virtual void close() = 0;

protected:
    Endpoint() : inbox_(std::make_shared<Mailbox>()) {}
    virtual void deliver(std::uint32_t dest, std::uint32_t tag, std::span<const std::uint8_t> payload) = 0;
    void check_filter(int source, int tag) const;

    std::shared_ptr<Mailbox> inbox_;
    std::uint32_t app_word_ = 0;

private:
    std::size_t max_payload_ = kDefaultMaxPayload;
    Traffic traffic_;
};

/// One master plus n workers wired through an in-process hub; index = rank.
/// Frames sent to a rank are buffered until that rank receives them.
std::vector<std::unique_ptr<Endpoint>> spawn_local(std::size_t n);

/// Bound TCP socket waiting for workers. Address "host:port"; port 0 picks a free port.
class Listener {
public:
    explicit Listener(const std::string& address);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    std::uint16_t port() const { return port_; }

    /// Accepts n workers, assigning ranks 1..n in handshake order.
    /// Errors: kTransport on timeout. Connections with a bad hello are
    /// rejected and do not count.
    std::unique_ptr<Endpoint> accept(std::size_t n, std::chrono::milliseconds timeout,
                                     std::uint32_t app_word = 0);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

std::unique_ptr<Endpoint> listen(const std::string& address, std::size_t n,
                                 std::chrono::milliseconds timeout, std::uint32_t app_word = 0);

/// Connects as a worker, retrying refused connections until `timeout`.
/// Errors: kTransport, kVersionMismatch when the master rejects the hello.
std::unique_ptr<Endpoint> connect(const std::string& address, std::chrono::milliseconds timeout);

/// Splits "host:port"; errors kConfig.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

}  // namespace riskbench::transport
