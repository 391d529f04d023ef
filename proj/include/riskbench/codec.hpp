#pragma once

// Architecture-independent encoding of problems and results.
//
// Problem image (.rbp), all integers and reals big-endian, reals IEEE-754 binary64:
//
//   "RBP1"            4   magic
//   version           u32 (= 1)
//   kind              u32 (ProblemKind)
//   id                u32 length + bytes
//   seed              u64
//   strike            f64
//   maturity          f64
//   barrier           f64 (BarrierDownOutCall only)
//   dimension         u32
//   spot, rate, sigma, correlation_rho, dividend_yield    5 x f64
//   method_params     u32 count, then per entry in sorted key order:
//                     key (u32 length + bytes), u32 n, n x f64
//
// Compressed container (.rbz): "RBZ1", u64 original length, raw DEFLATE stream.

#include <atomic>
#include <cstdint>
#include <filesystem>

#include "riskbench/byte_io.hpp"
#include "riskbench/types.hpp"

namespace riskbench::codec {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kProblemMagic = "RBP1";
inline constexpr std::string_view kCompressedMagic = "RBZ1";
inline constexpr std::string_view kResultMagic = "RBS1";

struct SerialBlob {
    Bytes payload;
    bool compressed = false;
    std::uint64_t original_length = 0;  // pre-compression size

    bool operator==(const SerialBlob&) const = default;
};

/// Wraps raw bytes, recognising the compressed container by its magic.
SerialBlob blob_from_bytes(Bytes bytes);

SerialBlob encode(const ProblemSpec& spec);
/// Accepts compressed or plain blobs. Errors: kBadMagic, kTruncated,
/// kVersionMismatch, kInvariant.
ProblemSpec decode(const SerialBlob& blob);
ProblemSpec decode(std::span<const std::uint8_t> bytes);

/// Errors: kState when the blob already is (resp. is not) compressed.
SerialBlob compress(const SerialBlob& blob);
SerialBlob decompress(const SerialBlob& blob);

void save(const std::filesystem::path& path, const ProblemSpec& spec, bool compressed = false);
ProblemSpec load(const std::filesystem::path& path);
/// The file's bytes as a blob, without decoding or validating them.
SerialBlob sload(const std::filesystem::path& path);

Bytes encode_result(const PricingResult& result);
PricingResult decode_result(std::span<const std::uint8_t> bytes);

/// File-level I/O counters, for observing how often files are touched.
struct IoCounters {
    std::atomic<std::uint64_t> opens{0};
    std::atomic<std::uint64_t> bytes_read{0};
    void reset() {
        opens = 0;
        bytes_read = 0;
    }
};
IoCounters& io_counters();

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace riskbench::codec
