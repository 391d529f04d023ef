#include <algorithm>

#include "riskbench/transport.hpp"

namespace riskbench::transport {

// ---- Mailbox -------------------------------------------------------------

void Mailbox::push(Frame frame) {
    {
        std::lock_guard lock(mu_);
        frames_.push_back(std::move(frame));
    }
    cv_.notify_all();
}

void Mailbox::fail(std::uint32_t rank, ErrorCode code, std::string message) {
    {
        std::lock_guard lock(mu_);
        failed_.try_emplace(rank, Failure{code, std::move(message)});
    }
    cv_.notify_all();
}

void Mailbox::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::deque<Frame>::iterator Mailbox::find(int source, int tag) {
    return std::find_if(frames_.begin(), frames_.end(), [&](const Frame& f) {
        return (source == kAny || f.source == static_cast<std::uint32_t>(source)) &&
               (tag == kAny || f.tag == static_cast<std::uint32_t>(tag));
    });
}

void Mailbox::raise_failure(int source) {
    auto report = [](std::uint32_t rank, Failure& f) {
        f.reported = true;
        if (f.code == ErrorCode::kPeerLost) throw PeerLost(rank);
        throw Error(f.code, f.message);
    };
    if (source != kAny) {
        if (auto it = failed_.find(static_cast<std::uint32_t>(source)); it != failed_.end()) {
            report(it->first, it->second);
        }
        return;
    }
    for (auto& [rank, failure] : failed_) {
        if (!failure.reported) report(rank, failure);
    }
}

bool Mailbox::wait(std::unique_lock<std::mutex>& lock, std::optional<Clock::time_point> deadline) {
    if (!deadline) {
        cv_.wait(lock);
        return true;
    }
    return cv_.wait_until(lock, *deadline) != std::cv_status::timeout;
}

std::optional<ProbeInfo> Mailbox::probe(int source, int tag,
                                        std::optional<Clock::time_point> deadline) {
    std::unique_lock lock(mu_);
    for (;;) {
        if (auto it = find(source, tag); it != frames_.end()) {
            return ProbeInfo{it->source, it->tag, it->payload.size()};
        }
        if (closed_) throw Error(ErrorCode::kState, "endpoint closed");
        raise_failure(source);
        if (!wait(lock, deadline) && find(source, tag) == frames_.end()) return std::nullopt;
    }
}

std::optional<Frame> Mailbox::take(int source, int tag, std::optional<Clock::time_point> deadline) {
    std::unique_lock lock(mu_);
    for (;;) {
        if (auto it = find(source, tag); it != frames_.end()) {
            Frame f = std::move(*it);
            frames_.erase(it);
            return f;
        }
        if (closed_) throw Error(ErrorCode::kState, "endpoint closed");
        raise_failure(source);
        if (!wait(lock, deadline) && find(source, tag) == frames_.end()) return std::nullopt;
    }
}

// ---- Endpoint ------------------------------------------------------------

void Endpoint::check_filter(int source, int tag) const {
    if (source != kAny && (source < 0 || static_cast<std::uint32_t>(source) >= size())) {
        throw Error(ErrorCode::kTransport, "unknown source rank " + std::to_string(source));
    }
    if (tag != kAny && (tag < static_cast<int>(kName) || tag > static_cast<int>(kResult))) {
        throw Error(ErrorCode::kProtocol, "unknown tag " + std::to_string(tag));
    }
}

void Endpoint::send(std::uint32_t dest, std::uint32_t tag, std::span<const std::uint8_t> payload) {
    if (dest >= size()) throw Error(ErrorCode::kTransport, "unknown rank " + std::to_string(dest));
    if (tag < kName || tag > kResult) throw Error(ErrorCode::kProtocol, "unknown tag " + std::to_string(tag));
    if (payload.size() > max_payload_) {
        throw Error(ErrorCode::kTransport, "payload of " + std::to_string(payload.size()) +
                                               " bytes exceeds the " + std::to_string(max_payload_) +
                                               "-byte limit");
    }
    if (dest == rank()) {
        inbox_->push(Frame{tag, rank(), Bytes(payload.begin(), payload.end())});
    } else {
        deliver(dest, tag, payload);
    }
    traffic_.frames++;
    traffic_.payload_bytes += payload.size();
    traffic_.wire_bytes += payload.size() + 12;
}

ProbeInfo Endpoint::probe(int source, int tag) {
    check_filter(source, tag);
    return *inbox_->probe(source, tag, std::nullopt);
}

Frame Endpoint::recv(int source, int tag) {
    check_filter(source, tag);
    return *inbox_->take(source, tag, std::nullopt);
}

std::optional<ProbeInfo> Endpoint::probe_for(int source, int tag, std::chrono::milliseconds timeout) {
    check_filter(source, tag);
    return inbox_->probe(source, tag, Clock::now() + timeout);
}

std::optional<Frame> Endpoint::recv_for(int source, int tag, std::chrono::milliseconds timeout) {
    check_filter(source, tag);
    return inbox_->take(source, tag, Clock::now() + timeout);
}

// ---- In-process hub ------------------------------------------------------

namespace {

struct Hub {
    std::vector<std::shared_ptr<Mailbox>> boxes;
    std::mutex mu;
    std::vector<bool> open;
};

class LocalEndpoint final : public Endpoint {
public:
    LocalEndpoint(std::shared_ptr<Hub> hub, std::uint32_t rank) : hub_(std::move(hub)), rank_(rank) {
        hub_->boxes[rank] = inbox_;
    }
    ~LocalEndpoint() override { close(); }

    std::uint32_t rank() const override { return rank_; }
    std::uint32_t size() const override { return static_cast<std::uint32_t>(hub_->boxes.size()); }

    void close() override {
        std::lock_guard lock(hub_->mu);
        if (!hub_->open[rank_]) return;
        hub_->open[rank_] = false;
        for (std::uint32_t r = 0; r < hub_->boxes.size(); ++r) {
            if (r != rank_) hub_->boxes[r]->fail(rank_, ErrorCode::kPeerLost, "");
        }
        inbox_->close();
    }

protected:
    void deliver(std::uint32_t dest, std::uint32_t tag, std::span<const std::uint8_t> payload) override {
        std::shared_ptr<Mailbox> box;
        {
            std::lock_guard lock(hub_->mu);
            if (!hub_->open[rank_]) throw Error(ErrorCode::kState, "endpoint closed");
            if (!hub_->open[dest]) throw PeerLost(dest);
            box = hub_->boxes[dest];
        }
        box->push(Frame{tag, rank_, Bytes(payload.begin(), payload.end())});
    }

private:
    std::shared_ptr<Hub> hub_;
    std::uint32_t rank_;
};

}  // namespace

std::vector<std::unique_ptr<Endpoint>> spawn_local(std::size_t n) {
    if (n < 1) throw Error(ErrorCode::kConfig, "spawn_local needs at least one worker");
    auto hub = std::make_shared<Hub>();
    hub->boxes.resize(n + 1);
    hub->open.assign(n + 1, true);
    std::vector<std::unique_ptr<Endpoint>> eps;
    for (std::uint32_t r = 0; r <= n; ++r) eps.push_back(std::make_unique<LocalEndpoint>(hub, r));
    return eps;
}

}  // namespace riskbench::transport
