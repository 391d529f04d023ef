#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "riskbench/mc_kernels.hpp"
#include "riskbench/pricing.hpp"

using namespace riskbench;

namespace {

ProblemSpec basket(std::uint32_t d, double strike, double maturity, double samples) {
    ProblemSpec s;
    s.id = "basket-" + std::to_string(d);
    s.kind = ProblemKind::kBasketPutMc;
    s.dimension = d;
    s.strike = strike;
    s.maturity = maturity;
    s.seed = 99;
    s.set_param("samples", samples);
    return s;
}

ProblemSpec localvol(double strike, double maturity, double samples) {
    ProblemSpec s;
    s.id = "lv";
    s.kind = ProblemKind::kLocalVolCallMc;
    s.strike = strike;
    s.maturity = maturity;
    s.seed = 5;
    s.set_param("samples", samples);
    return s;
}

ProblemSpec lsmc(std::uint32_t d, double strike, double maturity, double paths, double per_year) {
    ProblemSpec s;
    s.id = "lsmc-" + std::to_string(d);
    s.kind = ProblemKind::kAmericanBasketPutLsmc;
    s.dimension = d;
    s.strike = strike;
    s.maturity = maturity;
    s.seed = 11;
    s.set_param("paths", paths);
    s.set_param("exercise_per_year", per_year);
    return s;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using rng::Philox4x32;
    CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
          Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::generate({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
          Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                               {0xa4093822, 0x299f31d0}) ==
          Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal stream moments") {
    const auto key = rng::stream_key("moments", 1);
    double sum = 0, sum_sq = 0;
    const int n = 200000;
    for (int p = 0; p < n / 2; ++p) {
        rng::NormalStream s(key, static_cast<std::uint64_t>(p), 0);
        for (int i = 0; i < 2; ++i) {
            const double z = s.next();
            sum += z;
            sum_sq += z * z;
        }
    }
    CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sum_sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("distinct problem ids get distinct streams") {
    CHECK(rng::stream_key("a", 1) != rng::stream_key("b", 1));
    CHECK(rng::stream_key("a", 1) != rng::stream_key("a", 2));
    CHECK(rng::stream_key("a", 1) == rng::stream_key("a", 1));
}

TEST_CASE("cholesky of equicorrelation and rejection of non-PSD input") {
    const auto mkt = MarketParams::equicorrelated(4, 100, 0.0, 0.2, 0.3);
    const auto l = kernels::cholesky(mkt.correlation, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double v = 0;
            for (std::size_t k = 0; k < 4; ++k) v += l[i * 4 + k] * l[j * 4 + k];
            CHECK(v == doctest::Approx(mkt.correlation[i * 4 + j]).epsilon(1e-12));
        }
    }
    // rho = 1 is semi-definite and accepted.
    CHECK_NOTHROW(kernels::cholesky(MarketParams::equicorrelated(3, 1, 0, 1, 1.0).correlation, 3));

    const auto bad = MarketParams::equicorrelated(3, 100, 0.0, 0.2, -0.9);
    try {
        kernels::cholesky(bad.correlation, 3);
        FAIL("expected a decomposition error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNumeric);
    }
    ProblemSpec spec = basket(3, 100, 1, 100);
    CHECK_THROWS_AS(mc_basket_put(spec, bad), Error);
}

TEST_CASE("basket put with zero volatility is deterministic") {
    auto mkt = MarketParams::equicorrelated(5, 100, 0.05, 1e-300, 0.3);
    mkt.spot = {80, 90, 100, 110, 95};
    const double avg = (80 + 90 + 100 + 110 + 95) / 5.0;
    for (double k : {90.0, 120.0}) {
        const auto res = mc_basket_put(basket(5, k, 1.5, 1000), mkt);
        const double expected = std::exp(-0.05 * 1.5) * std::max(k - avg * std::exp(0.05 * 1.5), 0.0);
        CHECK(res.price == doctest::Approx(expected).epsilon(1e-12));
        CHECK(*res.std_error < 1e-9);
    }
}

TEST_CASE("one-asset basket matches Black-Scholes within 3 standard errors") {
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    for (double k : {90.0, 100.0, 110.0}) {
        const auto res = mc_basket_put(basket(1, k, 1.0, 200000), mkt);
        REQUIRE(res.std_error);
        CHECK(std::abs(res.price - bs_put(100, k, 0.05, 0.0, 0.2, 1.0)) < 3.0 * *res.std_error);
    }
}

TEST_CASE("Monte Carlo results are reproducible and thread-count independent") {
    const auto mkt = MarketParams::equicorrelated(8, 100, 0.05, 0.2, 0.3);
    const auto spec = basket(8, 100, 1.0, 20000);
    const auto a = mc_basket_put(spec, mkt, {1});
    const auto b = mc_basket_put(spec, mkt, {1});
    const auto c = mc_basket_put(spec, mkt, {4});
    CHECK(a.price == b.price);
    CHECK(a.price == c.price);
    CHECK(*a.std_error == *c.std_error);

    auto other = spec;
    other.seed = spec.seed + 1;
    CHECK(mc_basket_put(other, mkt).price != a.price);
}

TEST_CASE("parallel kernels agree with the serial reference") {
    const auto mkt = MarketParams::equicorrelated(6, 100, 0.03, 0.25, 0.3);
    const auto model = kernels::GbmModel::from_market(mkt);
    const auto key = rng::stream_key("kernels", 3);

    SUBCASE("basket") {
        const auto par = kernels::basket_put_terminal(model, key, 100, 1.0, 5000, 3);
        const auto ref = kernels::basket_put_terminal_reference(model, key, 100, 1.0, 5000);
        CHECK(par.count == ref.count);
        CHECK(par.sum == doctest::Approx(ref.sum).epsilon(1e-12));
        CHECK(par.sum_sq == doctest::Approx(ref.sum_sq).epsilon(1e-12));
    }
    SUBCASE("local vol") {
        const kernels::LocalVolPath path{100, 0.03, 0.0, 1.0, 50};
        const LocalVolSurface surf{0.2, 0.1, 0.02, 0.05, 1.0, 100};
        const auto par = kernels::localvol_call(path, surf, key, 100, 3000, 3);
        const auto ref = kernels::localvol_call_reference(path, surf, key, 100, 3000);
        CHECK(par.sum == doctest::Approx(ref.sum).epsilon(1e-12));
    }
    SUBCASE("lsmc") {
        const auto par_paths = kernels::basket_average_paths(model, key, 0.1, 10, 3000, 3);
        const auto ref_paths = kernels::basket_average_paths_reference(model, key, 0.1, 10, 3000);
        CHECK(par_paths == ref_paths);
        const auto par = kernels::lsmc_put(par_paths, 10, 0.1, 100, 0.03, 3);
        const auto ref = kernels::lsmc_put_reference(ref_paths, 10, 0.1, 100, 0.03);
        CHECK(par.stats.mean() == doctest::Approx(ref.stats.mean()).epsilon(1e-6));
    }
}

TEST_CASE("local vol with a flat surface matches Black-Scholes") {
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    const LocalVolSurface flat{0.2, 0.0, 0.0, 0.01, 2.0, 100};
    // The log-Euler scheme is exact for constant volatility, so no bias term is needed.
    for (double k : {90.0, 110.0}) {
        const auto res = mc_localvol_call(localvol(k, 1.0, 100000), mkt, flat);
        CHECK(std::abs(res.price - bs_call(100, k, 0.05, 0.0, 0.2, 1.0)) < 3.0 * *res.std_error);
    }
}

TEST_CASE("local vol call with vanishing strike prices the forward") {
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    const LocalVolSurface skewed{0.2, 0.3, 0.05, 0.05, 1.0, 100};
    const auto res = mc_localvol_call(localvol(1e-8, 2.0, 50000), mkt, skewed);
    CHECK(std::abs(res.price - 100.0) < 3.0 * *res.std_error);
    const auto again = mc_localvol_call(localvol(1e-8, 2.0, 50000), mkt, skewed);
    CHECK(res.price == again.price);
}

TEST_CASE("local vol rejects an invalid surface") {
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    const LocalVolSurface inverted{0.2, 0.0, 0.0, 0.5, 0.1, 100};
    try {
        mc_localvol_call(localvol(100, 1, 100), mkt, inverted);
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kConfig);
    }
}

TEST_CASE("LSMC with a single exercise date is the European basket put on the same paths") {
    const auto mkt = MarketParams::equicorrelated(7, 100, 0.05, 0.2, 0.3);
    for (double k : {90.0, 110.0}) {
        // One exercise date per maturity.
        auto am = lsmc(7, k, 1.0, 20000, 1.0);
        auto eu = basket(7, k, 1.0, 20000);
        eu.id = am.id;
        eu.seed = am.seed;
        const auto a = lsmc_american_basket_put(am, mkt);
        const auto e = mc_basket_put(eu, mkt);
        CHECK(a.price == e.price);
        CHECK(*a.std_error == *e.std_error);
    }
}

TEST_CASE("LSMC dominates the European basket put up to noise") {
    const auto mkt = MarketParams::equicorrelated(7, 100, 0.05, 0.2, 0.3);
    for (double k : {90.0, 100.0, 110.0}) {
        const auto a = lsmc_american_basket_put(lsmc(7, k, 2.0, 20000, 10), mkt);
        const auto e = mc_basket_put(basket(7, k, 2.0, 20000), mkt);
        const double noise = std::hypot(*a.std_error, *e.std_error);
        CHECK(a.price >= e.price - 3.0 * noise);
    }
}

TEST_CASE("LSMC records dates where regression had too few in-the-money paths") {
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    // Three paths cannot support a three-function regression at every date.
    const auto res = lsmc_american_basket_put(lsmc(1, 100, 1.0, 3, 10), mkt);
    CHECK(std::isfinite(res.price));
    CHECK(res.degraded_dates > 0);
}

TEST_CASE("Monte Carlo confidence intervals have nominal coverage") {
    // 99% intervals over 100 independent seeds: expect >= 95 hits.
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    const double exact = bs_put(100, 100, 0.05, 0.0, 0.2, 1.0);
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto spec = basket(1, 100, 1.0, 4000);
        spec.seed = seed;
        const auto res = mc_basket_put(spec, mkt);
        if (std::abs(res.price - exact) <= 2.5758 * *res.std_error) ++hits;
    }
    CHECK(hits >= 95);
}

TEST_CASE("one-asset LSMC is close to the binomial American put") {
    // 50 exercise dates per year and 4e5 paths: the Bermudan gap plus the
    // regression low bias is about 0.45%, leaving roughly 3 std errors of room.
    const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
    const double tree = oracle::crr_put(100, 100, 0.05, 0.2, 1.0, 1000, true);
    const auto res = lsmc_american_basket_put(lsmc(1, 100, 1.0, 400000, 50), mkt);
    CHECK(std::abs(res.price - tree) / tree < 0.01);
}
