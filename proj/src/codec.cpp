#include "riskbench/codec.hpp"

#include <fstream>
#include <limits>

#include <zlib.h>

namespace riskbench::codec {

IoCounters& io_counters() {
    static IoCounters counters;
    return counters;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    io_counters().opens++;
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
    io_counters().bytes_read += data.size();
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

SerialBlob blob_from_bytes(Bytes bytes) {
    SerialBlob blob;
    if (starts_with(bytes, kCompressedMagic)) {
        ByteReader r(bytes);
        r.raw(kCompressedMagic.size());
        blob.original_length = r.u64();
        blob.compressed = true;
    } else {
        blob.original_length = bytes.size();
    }
    blob.payload = std::move(bytes);
    return blob;
}

SerialBlob encode(const ProblemSpec& spec) {
    ByteWriter w;
    w.magic(kProblemMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(spec.kind));
    w.str(spec.id);
    w.u64(spec.seed);
    w.f64(spec.strike);
    w.f64(spec.maturity);
    if (spec.kind == ProblemKind::kBarrierDownOutCall) w.f64(spec.barrier.value_or(0.0));
    w.u32(spec.dimension);
    w.f64(spec.model.spot);
    w.f64(spec.model.rate);
    w.f64(spec.model.sigma);
    w.f64(spec.model.correlation_rho);
    w.f64(spec.model.dividend_yield);
    w.u32(static_cast<std::uint32_t>(spec.method_params.size()));
    for (const auto& [key, values] : spec.method_params) {
        w.str(key);
        w.u32(static_cast<std::uint32_t>(values.size()));
        for (double v : values) w.f64(v);
    }
    SerialBlob blob;
    blob.payload = w.take();
    blob.original_length = blob.payload.size();
    return blob;
}

ProblemSpec decode(std::span<const std::uint8_t> bytes) {
    if (starts_with(bytes, kCompressedMagic)) {
        return decode(decompress(blob_from_bytes(Bytes(bytes.begin(), bytes.end()))));
    }
    ByteReader r(bytes);
    if (!r.at_magic(kProblemMagic)) {
        if (bytes.size() < kProblemMagic.size()) throw Error(ErrorCode::kTruncated, "truncated magic");
        throw Error(ErrorCode::kBadMagic, "not a problem image (bad magic)");
    }
    r.raw(kProblemMagic.size());
    const auto version = r.u32();
    if (version != kFormatVersion) {
        throw Error(ErrorCode::kVersionMismatch,
                    "format version " + std::to_string(version) + " unsupported");
    }
    const auto raw_kind = r.u32();
    if (!is_valid_kind(raw_kind)) {
        throw Error(ErrorCode::kInvariant, "unknown kind " + std::to_string(raw_kind));
    }
    ProblemSpec spec;
    spec.kind = static_cast<ProblemKind>(raw_kind);
    spec.id = r.str();
    spec.seed = r.u64();
    spec.strike = r.f64();
    spec.maturity = r.f64();
    if (spec.kind == ProblemKind::kBarrierDownOutCall) spec.barrier = r.f64();
    spec.dimension = r.u32();
    spec.model.spot = r.f64();
    spec.model.rate = r.f64();
    spec.model.sigma = r.f64();
    spec.model.correlation_rho = r.f64();
    spec.model.dividend_yield = r.f64();
    const auto count = r.u32();
    std::string previous;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string key = r.str();
        if (i > 0 && !(previous < key)) {
            throw Error(ErrorCode::kInvariant, "method parameters not in sorted order");
        }
        const auto n = r.u32();
        if (n > r.remaining() / 8) throw Error(ErrorCode::kTruncated, "truncated parameter vector");
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64();
        spec.method_params.emplace(key, std::move(values));
        previous = std::move(key);
    }
    if (!r.done()) throw Error(ErrorCode::kInvariant, "trailing bytes after problem image");
    validate(spec);
    return spec;
}

ProblemSpec decode(const SerialBlob& blob) {
    if (blob.compressed) return decode(decompress(blob).payload);
    return decode(std::span<const std::uint8_t>(blob.payload));
}

SerialBlob compress(const SerialBlob& blob) {
    if (blob.compressed) throw Error(ErrorCode::kState, "blob is already compressed");

    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw Error(ErrorCode::kState, "deflateInit2 failed");
    }
    Bytes deflated(deflateBound(&zs, blob.payload.size()));
    zs.next_in = const_cast<Bytef*>(blob.payload.data());
    zs.avail_in = static_cast<uInt>(blob.payload.size());
    zs.next_out = deflated.data();
    zs.avail_out = static_cast<uInt>(deflated.size());
    const int rc = deflate(&zs, Z_FINISH);
    deflated.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error(ErrorCode::kState, "deflate did not finish");

    ByteWriter w;
    w.magic(kCompressedMagic);
    w.u64(blob.payload.size());
    w.raw(deflated);
    SerialBlob out;
    out.payload = w.take();
    out.compressed = true;
    out.original_length = blob.payload.size();
    return out;
}

SerialBlob decompress(const SerialBlob& blob) {
    if (!blob.compressed) throw Error(ErrorCode::kState, "blob is not compressed");
    ByteReader r(blob.payload);
    if (!r.at_magic(kCompressedMagic)) throw Error(ErrorCode::kBadMagic, "bad compressed magic");
    r.raw(kCompressedMagic.size());
    const auto original = r.u64();
    if (original > (std::uint64_t{1} << 32)) {
        throw Error(ErrorCode::kInvariant, "implausible original length");
    }
    const auto body = r.raw(r.remaining());

    Bytes out(original);
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw Error(ErrorCode::kState, "inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(body.data());
    zs.avail_in = static_cast<uInt>(body.size());
    // One spare byte detects streams longer than announced.
    Bytes sink(out.size() + 1);
    zs.next_out = sink.data();
    zs.avail_out = static_cast<uInt>(sink.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc == Z_BUF_ERROR || (rc == Z_OK && produced < original)) {
        throw Error(ErrorCode::kTruncated, "compressed stream ended early");
    }
    if (rc != Z_STREAM_END || produced != original) {
        throw Error(ErrorCode::kInvariant, "compressed stream corrupt or length mismatch");
    }
    std::copy_n(sink.begin(), original, out.begin());
    SerialBlob plain;
    plain.payload = std::move(out);
    plain.original_length = original;
    return plain;
}

void save(const std::filesystem::path& path, const ProblemSpec& spec, bool compressed) {
    validate(spec);
    auto blob = encode(spec);
    if (compressed) blob = compress(blob);
    write_file(path, blob.payload);
}

ProblemSpec load(const std::filesystem::path& path) { return decode(blob_from_bytes(read_file(path))); }

SerialBlob sload(const std::filesystem::path& path) { return blob_from_bytes(read_file(path)); }

Bytes encode_result(const PricingResult& result) {
    ByteWriter w;
    w.magic(kResultMagic);
    w.u32(kFormatVersion);
    w.str(result.problem_id);
    w.f64(result.price);
    w.u32((result.std_error ? 1u : 0u) | (result.delta ? 2u : 0u));
    if (result.std_error) w.f64(*result.std_error);
    if (result.delta) w.f64(*result.delta);
    w.f64(result.wall_time);
    w.u32(result.degraded_dates);
    w.u32(static_cast<std::uint32_t>(result.status));
    w.str(result.message);
    return w.take();
}

PricingResult decode_result(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (!r.at_magic(kResultMagic)) throw Error(ErrorCode::kBadMagic, "not a result record");
    r.raw(kResultMagic.size());
    if (const auto v = r.u32(); v != kFormatVersion) {
        throw Error(ErrorCode::kVersionMismatch, "result version " + std::to_string(v));
    }
    PricingResult out;
    out.problem_id = r.str();
    out.price = r.f64();
    const auto flags = r.u32();
    if (flags & 1u) out.std_error = r.f64();
    if (flags & 2u) out.delta = r.f64();
    out.wall_time = r.f64();
    out.degraded_dates = r.u32();
    out.status = static_cast<ErrorCode>(r.u32());
    out.message = r.str();
    if (!r.done()) throw Error(ErrorCode::kInvariant, "trailing bytes after result record");
    return out;
}

}  // namespace riskbench::codec
