#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "riskbench/error.hpp"

namespace riskbench {

using Bytes = std::vector<std::uint8_t>;

/// Big-endian writer for the on-disk and on-wire formats.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void u64(std::uint64_t v) {
        for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.insert(out_.end(), s.begin(), s.end());
    }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void blob(std::span<const std::uint8_t> b) {
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b);
    }

    Bytes take() { return std::move(out_); }
    const Bytes& bytes() const { return out_; }

private:
    Bytes out_;
};

/// Bounds-checked big-endian reader; running short throws Error(kTruncated).
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32() {
        auto b = need(4);
        std::uint32_t v = 0;
        for (auto c : b) v = (v << 8) | c;
        return v;
    }
    std::uint64_t u64() {
        auto b = need(8);
        std::uint64_t v = 0;
        for (auto c : b) v = (v << 8) | c;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        auto b = need(n);
        return std::string(b.begin(), b.end());
    }
    std::span<const std::uint8_t> raw(std::size_t n) { return need(n); }
    std::span<const std::uint8_t> blob() { return need(u32()); }

    bool at_magic(std::string_view m) const {
        return remaining() >= m.size() && std::memcmp(in_.data() + pos_, m.data(), m.size()) == 0;
    }
    std::size_t remaining() const { return in_.size() - pos_; }
    bool done() const { return pos_ == in_.size(); }

private:
    std::span<const std::uint8_t> need(std::size_t n) {
        if (remaining() < n) {
            throw Error(ErrorCode::kTruncated, "truncated input: need " + std::to_string(n) +
                                                   " bytes, have " + std::to_string(remaining()));
        }
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

inline bool starts_with(std::span<const std::uint8_t> b, std::string_view magic) {
    return b.size() >= magic.size() && std::memcmp(b.data(), magic.data(), magic.size()) == 0;
}

}  // namespace riskbench
