#include <doctest.h>

#include <filesystem>
#include <unistd.h>

#include "generators.hpp"
#include "golden_specs.hpp"
#include "riskbench/codec.hpp"
#include "riskbench/portfolio.hpp"

using namespace riskbench;
namespace fs = std::filesystem;

namespace {

fs::path golden_file(const char* name) { return fs::path(RISKBENCH_TEST_DATA) / "golden" / name; }

ErrorCode decode_error(std::span<const std::uint8_t> bytes) {
    try {
        codec::decode(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kOk;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("riskbench-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("golden problem images pin the exact bytes") {
    const std::pair<const char*, ProblemSpec> cases[] = {
        {"vanilla_default.rbp", golden::vanilla()},
        {"barrier.rbp", golden::barrier()},
        {"lsmc_basket.rbp", golden::lsmc()},
    };
    for (const auto& [name, spec] : cases) {
        CAPTURE(name);
        const auto bytes = codec::read_file(golden_file(name));
        CHECK(codec::encode(spec).payload == bytes);
        CHECK(codec::load(golden_file(name)) == spec);
    }
}

TEST_CASE("default vanilla image length follows the field widths") {
    // magic 4, version 4, kind 4, id 4+13, seed 8, strike 8, maturity 8,
    // dimension 4, model 5x8, parameter count 4.
    const auto blob = codec::encode(golden::vanilla());
    CHECK(blob.payload.size() == 4 + 4 + 4 + (4 + 13) + 8 + 8 + 8 + 4 + 40 + 4);
    CHECK_FALSE(blob.compressed);
    CHECK(blob.original_length == blob.payload.size());
}

TEST_CASE("encode/decode round trip over randomized specs") {
    gen::Rng g(2024);
    for (int i = 0; i < 10000; ++i) {
        const auto spec = gen::problem(g);
        const auto blob = codec::encode(spec);
        const auto back = codec::decode(blob);
        REQUIRE(back == spec);
        REQUIRE(codec::encode(back).payload == blob.payload);
        if (i % 10 == 0) {
            const auto packed = codec::compress(blob);
            REQUIRE(codec::decompress(packed).payload == blob.payload);
            REQUIRE(codec::decode(packed) == spec);
            REQUIRE(codec::decode(std::span<const std::uint8_t>(packed.payload)) == spec);
        }
    }
}

TEST_CASE("ids alone distinguish payloads") {
    auto a = golden::vanilla(), b = golden::vanilla();
    b.id = "VanillaCall_1";
    CHECK(codec::encode(a).payload != codec::encode(b).payload);
}

TEST_CASE("repetitive payload compresses below half its size") {
    auto spec = golden::vanilla();
    spec.method_params["grid"] = std::vector<double>(1000, 0.25);
    const auto plain = codec::encode(spec);
    const auto packed = codec::compress(plain);
    CHECK(packed.payload.size() * 2 < plain.payload.size());
    CHECK(packed.original_length == plain.payload.size());
}

TEST_CASE("incompressible payload still round trips") {
    gen::Rng g(5);
    auto spec = golden::vanilla();
    std::vector<double> noise(500);
    for (auto& v : noise) v = gen::any_finite(g);
    spec.method_params["noise"] = noise;
    const auto plain = codec::encode(spec);
    CHECK(codec::decode(codec::compress(plain)) == spec);
}

TEST_CASE("compression state errors") {
    const auto plain = codec::encode(golden::vanilla());
    const auto packed = codec::compress(plain);
    try {
        codec::compress(packed);
        FAIL("double compression accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kState);
    }
    try {
        codec::decompress(plain);
        FAIL("double decompression accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kState);
    }
}

TEST_CASE("corrupt images fail closed with distinct errors") {
    const auto bytes = codec::encode(golden::barrier()).payload;

    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        CAPTURE(cut);
        const auto code = decode_error(std::span<const std::uint8_t>(bytes.data(), cut));
        CHECK(code == ErrorCode::kTruncated);
    }

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(decode_error(bad_magic) == ErrorCode::kBadMagic);

    auto bad_version = bytes;
    bad_version[7] = 2;
    CHECK(decode_error(bad_version) == ErrorCode::kVersionMismatch);

    auto bad_kind = bytes;
    bad_kind[11] = 99;
    CHECK(decode_error(bad_kind) == ErrorCode::kInvariant);

    auto trailing = bytes;
    trailing.push_back(0);
    CHECK(decode_error(trailing) == ErrorCode::kInvariant);

    auto invalid = golden::barrier();
    invalid.strike = -1;
    CHECK(decode_error(codec::encode(invalid).payload) == ErrorCode::kInvariant);

    const auto packed = codec::compress(codec::encode(golden::lsmc())).payload;
    for (std::size_t cut = 4; cut < packed.size(); cut += 7) {
        CAPTURE(cut);
        CHECK(decode_error(std::span<const std::uint8_t>(packed.data(), cut)) == ErrorCode::kTruncated);
    }
}

TEST_CASE("save, load and sload") {
    TempDir dir("codec");
    const auto spec = golden::lsmc();
    codec::save(dir.path / "a.rbp", spec);
    codec::save(dir.path / "a.rbz", spec, true);
    CHECK(codec::load(dir.path / "a.rbp") == spec);
    CHECK(codec::load(dir.path / "a.rbz") == spec);
    CHECK(codec::sload(dir.path / "a.rbz").compressed);
    CHECK(codec::decode(codec::sload(dir.path / "a.rbp")) == spec);

    try {
        codec::load(dir.path / "missing.rbp");
        FAIL("missing file accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kIo);
    }

    // sload hands back invalid images untouched; decode is where they fail.
    auto invalid = codec::encode(spec).payload;
    invalid[5] = 9;
    codec::write_file(dir.path / "bad.rbp", invalid);
    CHECK(codec::sload(dir.path / "bad.rbp").payload == invalid);
    CHECK_THROWS_AS(codec::load(dir.path / "bad.rbp"), Error);
}

TEST_CASE("sload touches each file exactly once") {
    TempDir dir("sload");
    PortfolioConfig cfg;
    cfg.output_dir = dir.path;
    cfg.target_total = 40;
    generate_portfolio(cfg);
    const auto jobs = list_jobs(dir.path);
    std::uint64_t total = 0;
    for (const auto& p : jobs) total += fs::file_size(p);

    codec::io_counters().reset();
    for (const auto& p : jobs) codec::sload(p);
    CHECK(codec::io_counters().opens == jobs.size());
    CHECK(codec::io_counters().bytes_read == total);

    for (const auto& p : jobs) CHECK(codec::decode(codec::sload(p)) == codec::load(p));
}

TEST_CASE("result records round trip") {
    gen::Rng g(77);
    for (int i = 0; i < 2000; ++i) {
        PricingResult r;
        r.problem_id = gen::text(g, 0, 30);
        r.price = gen::any_finite(g);
        if (gen::below(g, 2)) r.std_error = gen::positive(g);
        if (gen::below(g, 2)) r.delta = gen::any_finite(g);
        r.wall_time = gen::positive(g);
        r.degraded_dates = static_cast<std::uint32_t>(gen::below(g, 50));
        r.status = static_cast<ErrorCode>(gen::below(g, 14));
        r.message = gen::text(g, 0, 20);
        const auto bytes = codec::encode_result(r);
        REQUIRE(codec::decode_result(bytes) == r);
    }
    auto bytes = codec::encode_result(PricingResult{});
    bytes.pop_back();
    CHECK_THROWS_AS(codec::decode_result(bytes), Error);
}
