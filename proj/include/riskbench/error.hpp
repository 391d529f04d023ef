#pragma once

#include <stdexcept>
#include <string>

namespace riskbench {

/// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorCode : unsigned {
    kOk = 0,
    kConfig = 1,        // bad parameters, grids, surfaces
    kIo = 2,            // missing/unreadable/unwritable files
    kNumeric = 3,       // decomposition failure, non-convergence
    kBadMagic = 4,
    kTruncated = 5,
    kVersionMismatch = 6,
    kInvariant = 7,     // decoded spec violates a domain invariant
    kState = 8,         // double compress / double decompress
    kTransport = 9,
    kPeerLost = 10,
    kProtocol = 11,
    kDimension = 12,
    kDispatch = 13,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by transport when a peer disconnects; carries the peer's rank.
class PeerLost : public Error {
public:
    explicit PeerLost(unsigned rank)
        : Error(ErrorCode::kPeerLost, "peer lost: rank " + std::to_string(rank)),
          rank_(rank) {}

    unsigned rank() const noexcept { return rank_; }

private:
    unsigned rank_;
};

}  // namespace riskbench
