#include "riskbench/portfolio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "riskbench/codec.hpp"
#include "riskbench/rng.hpp"

namespace riskbench {
namespace {

/// 32 quarterly maturities anchored at four months: 1/3 + k/4, k = 0..31.
std::vector<double> quarterly_from_four_months() {
    std::vector<double> t(32);
    for (int k = 0; k < 32; ++k) t[k] = 1.0 / 3.0 + k / 4.0;
    return t;
}

/// 0.2, 0.4, ..., 5.0
std::vector<double> fifths_to_five_years() {
    std::vector<double> t(25);
    for (int k = 0; k < 25; ++k) t[k] = (k + 1) / 5.0;
    return t;
}

std::vector<double> percent_range(int lo, int hi) {
    std::vector<double> f;
    for (int p = lo; p <= hi; ++p) f.push_back(p / 100.0);
    return f;
}

}  // namespace

Tranche tranche_grids(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::kVanillaCall:
        case ProblemKind::kBarrierDownOutCall:
        case ProblemKind::kAmericanPutPde:
            return {kind, quarterly_from_four_months(), percent_range(70, 130), 1, 1952};
        case ProblemKind::kBasketPutMc:
            return {kind, fifths_to_five_years(), percent_range(90, 110), 40, 525};
        case ProblemKind::kLocalVolCallMc:
            return {kind, fifths_to_five_years(), percent_range(80, 120), 1, 1025};
        case ProblemKind::kAmericanBasketPutLsmc:
            return {kind, fifths_to_five_years(), percent_range(90, 110), 7, 525};
        case ProblemKind::kVanillaPut: break;
    }
    throw Error(ErrorCode::kConfig, "no portfolio tranche for " + std::string(kind_name(kind)));
}

std::vector<Tranche> portfolio_tranches() {
    return {tranche_grids(ProblemKind::kVanillaCall),
            tranche_grids(ProblemKind::kBarrierDownOutCall),
            tranche_grids(ProblemKind::kAmericanPutPde),
            tranche_grids(ProblemKind::kBasketPutMc),
            tranche_grids(ProblemKind::kLocalVolCallMc),
            tranche_grids(ProblemKind::kAmericanBasketPutLsmc)};
}

namespace {

void set_method_params(ProblemSpec& spec, const PortfolioConfig& cfg) {
    auto scaled = [&](double n) { return std::max(2.0, std::round(n * cfg.mc_scale)); };
    switch (spec.kind) {
        case ProblemKind::kVanillaCall:
        case ProblemKind::kVanillaPut: break;
        case ProblemKind::kBarrierDownOutCall:
        case ProblemKind::kAmericanPutPde:
            spec.set_param("space_nodes", 400);
            spec.set_param("dt", 2.0 / 365.0);
            break;
        case ProblemKind::kBasketPutMc: spec.set_param("samples", scaled(1e6)); break;
        case ProblemKind::kLocalVolCallMc:
            spec.set_param("samples", scaled(1e6));
            spec.set_param("steps_per_year", 100);
            spec.set_param("lv_sigma0", cfg.sigma);
            spec.set_param("lv_skew", 0.1);
            spec.set_param("lv_term", -0.01);
            spec.set_param("lv_floor", 0.05);
            spec.set_param("lv_cap", 1.0);
            break;
        case ProblemKind::kAmericanBasketPutLsmc:
            spec.set_param("paths", scaled(1e5));
            spec.set_param("exercise_per_year", 10);
            break;
    }
}

/// Evenly spread subset of [0, count) of size `keep`.
std::vector<std::size_t> spread(std::size_t count, std::size_t keep) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep; ++i) idx.push_back(i * count / keep);
    return idx;
}

}  // namespace

std::vector<ProblemSpec> generate_portfolio(const PortfolioConfig& cfg) {
    if (!(cfg.spot0 > 0.0) || !(cfg.sigma > 0.0) || !(cfg.barrier_fraction > 0.0) ||
        !(cfg.barrier_fraction < 1.0) || !(cfg.mc_scale > 0.0)) {
        throw Error(ErrorCode::kConfig, "invalid portfolio configuration");
    }
    std::vector<Tranche> tranches;
    for (auto& t : portfolio_tranches()) {
        if (cfg.kinds.empty() || std::find(cfg.kinds.begin(), cfg.kinds.end(), t.kind) != cfg.kinds.end()) {
            tranches.push_back(std::move(t));
        }
    }
    std::size_t full = 0;
    for (const auto& t : tranches) full += t.expected_count;

    std::vector<ProblemSpec> out;
    for (const auto& t : tranches) {
        std::size_t keep = t.expected_count;
        if (cfg.target_total && full > 0) {
            keep = static_cast<std::size_t>(std::llround(
                static_cast<double>(*cfg.target_total) * t.expected_count / static_cast<double>(full)));
            keep = std::clamp<std::size_t>(keep, 1, t.expected_count);
        }
        const std::size_t n_strikes = t.strike_fractions.size();
        for (std::size_t index : spread(t.expected_count, keep)) {
            ProblemSpec spec;
            spec.kind = t.kind;
            spec.id = std::string(kind_name(t.kind)) + "_" + std::to_string(index);
            spec.maturity = t.maturities[index / n_strikes];
            spec.strike = cfg.spot0 * t.strike_fractions[index % n_strikes];
            spec.dimension = t.dimension;
            spec.model = {cfg.spot0, cfg.rate, cfg.sigma, t.dimension > 1 ? cfg.correlation_rho : 0.0, 0.0};
            if (t.kind == ProblemKind::kBarrierDownOutCall) spec.barrier = cfg.barrier_fraction * cfg.spot0;
            spec.seed = rng::splitmix64(cfg.seed0 + rng::fnv1a64(spec.id));
            set_method_params(spec, cfg);
            out.push_back(std::move(spec));
        }
    }

    if (!cfg.output_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        std::size_t written = 0;
        for (const auto& spec : out) {
            const auto path = cfg.output_dir / (spec.id + (cfg.compress ? ".rbz" : ".rbp"));
            try {
                codec::save(path, spec, cfg.compress);
            } catch (const Error& e) {
                throw Error(ErrorCode::kIo, "portfolio generation aborted after " +
                                                std::to_string(written) + " of " +
                                                std::to_string(out.size()) + " files: " + e.what());
            }
            ++written;
        }
    }
    return out;
}

bool job_id_less(std::string_view a, std::string_view b) {
    auto split = [](std::string_view s) {
        const auto cut = s.rfind('_');
        long index = -1;
        if (cut != std::string_view::npos) {
            const auto digits = s.substr(cut + 1);
            if (std::from_chars(digits.data(), digits.data() + digits.size(), index).ec != std::errc{}) {
                index = -1;
            }
        }
        return std::pair{index >= 0 ? s.substr(0, cut) : s, index};
    };
    const auto [ka, ia] = split(a);
    const auto [kb, ib] = split(b);
    if (ka != kb) return ka < kb;
    if (ia != ib) return ia < ib;
    return a < b;
}

std::vector<std::filesystem::path> list_jobs(const std::filesystem::path& dir) {
    std::error_code ec;
    std::vector<std::filesystem::path> jobs;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".rbp" || ext == ".rbz")) jobs.push_back(entry.path());
    }
    if (ec) throw Error(ErrorCode::kIo, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) {
        return job_id_less(a.stem().string(), b.stem().string());
    });
    return jobs;
}

}  // namespace riskbench
