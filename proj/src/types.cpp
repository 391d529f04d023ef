#include "riskbench/types.hpp"

#include <cmath>

namespace riskbench {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kOk: return "ok";
        case ErrorCode::kConfig: return "config";
        case ErrorCode::kIo: return "io";
        case ErrorCode::kNumeric: return "numeric";
        case ErrorCode::kBadMagic: return "bad-magic";
        case ErrorCode::kTruncated: return "truncated";
        case ErrorCode::kVersionMismatch: return "version-mismatch";
        case ErrorCode::kInvariant: return "invariant";
        case ErrorCode::kState: return "state";
        case ErrorCode::kTransport: return "transport";
        case ErrorCode::kPeerLost: return "peer-lost";
        case ErrorCode::kProtocol: return "protocol";
        case ErrorCode::kDimension: return "dimension";
        case ErrorCode::kDispatch: return "dispatch";
    }
    return "unknown";
}

std::string_view kind_name(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::kVanillaCall: return "VanillaCall";
        case ProblemKind::kVanillaPut: return "VanillaPut";
        case ProblemKind::kBarrierDownOutCall: return "BarrierDownOutCall";
        case ProblemKind::kAmericanPutPde: return "AmericanPutPde";
        case ProblemKind::kBasketPutMc: return "BasketPutMc";
        case ProblemKind::kLocalVolCallMc: return "LocalVolCallMc";
        case ProblemKind::kAmericanBasketPutLsmc: return "AmericanBasketPutLsmc";
    }
    return "Unknown";
}

std::optional<ProblemKind> kind_from_name(std::string_view name) {
    for (auto k : kAllKinds) {
        if (kind_name(k) == name) return k;
    }
    return std::nullopt;
}

bool is_valid_kind(std::uint32_t raw) { return raw >= 1 && raw <= 7; }

bool is_monte_carlo(ProblemKind kind) {
    return kind == ProblemKind::kBasketPutMc || kind == ProblemKind::kLocalVolCallMc ||
           kind == ProblemKind::kAmericanBasketPutLsmc;
}

double ProblemSpec::param(std::string_view name, double fallback) const {
    auto it = method_params.find(std::string(name));
    if (it == method_params.end() || it->second.empty()) return fallback;
    return it->second.front();
}

namespace {

[[noreturn]] void violated(const ProblemSpec& spec, const std::string& what) {
    throw Error(ErrorCode::kInvariant, "problem '" + spec.id + "': " + what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void validate(const ProblemSpec& spec) {
    if (spec.id.empty()) violated(spec, "empty id");
    if (!is_valid_kind(static_cast<std::uint32_t>(spec.kind))) violated(spec, "unknown kind");
    if (!positive_finite(spec.strike)) violated(spec, "strike must be > 0");
    if (!positive_finite(spec.maturity)) violated(spec, "maturity must be > 0");
    if (spec.dimension == 0) violated(spec, "dimension must be >= 1");

    const bool wants_barrier = spec.kind == ProblemKind::kBarrierDownOutCall;
    if (wants_barrier != spec.barrier.has_value()) {
        violated(spec, wants_barrier ? "missing barrier" : "barrier given for non-barrier kind");
    }
    if (spec.barrier && !positive_finite(*spec.barrier)) violated(spec, "barrier must be > 0");

    const bool multi = spec.kind == ProblemKind::kBasketPutMc ||
                       spec.kind == ProblemKind::kAmericanBasketPutLsmc;
    if (!multi && spec.dimension != 1) violated(spec, "single-asset kind with dimension != 1");

    const auto& m = spec.model;
    if (!positive_finite(m.spot)) violated(spec, "spot must be > 0");
    if (!positive_finite(m.sigma)) violated(spec, "sigma must be > 0");
    if (!std::isfinite(m.rate) || !std::isfinite(m.dividend_yield)) {
        violated(spec, "rate/dividend must be finite");
    }
    // Equicorrelation is PSD iff -1/(d-1) <= rho <= 1.
    if (!(m.correlation_rho <= 1.0) ||
        (spec.dimension > 1 && m.correlation_rho < -1.0 / (spec.dimension - 1.0))) {
        violated(spec, "equicorrelation not positive semi-definite");
    }
    for (const auto& [key, values] : spec.method_params) {
        if (key.empty()) violated(spec, "empty method parameter name");
        for (double v : values) {
            if (!std::isfinite(v)) violated(spec, "non-finite method parameter '" + key + "'");
        }
    }
}

MarketParams MarketParams::scalar_market(double spot, double rate, double sigma) {
    return equicorrelated(1, spot, rate, sigma, 0.0);
}

MarketParams MarketParams::equicorrelated(std::size_t d, double spot, double rate, double sigma,
                                          double rho) {
    MarketParams m;
    m.spot.assign(d, spot);
    m.sigma.assign(d, sigma);
    m.correlation.assign(d * d, rho);
    for (std::size_t i = 0; i < d; ++i) m.correlation[i * d + i] = 1.0;
    m.rate = rate;
    return m;
}

void validate(const MarketParams& mkt) {
    const std::size_t d = mkt.spot.size();
    if (d == 0 || mkt.sigma.size() != d || mkt.correlation.size() != d * d) {
        throw Error(ErrorCode::kDimension, "market dimensions disagree");
    }
    for (std::size_t i = 0; i < d; ++i) {
        if (!positive_finite(mkt.spot[i]) || !positive_finite(mkt.sigma[i])) {
            throw Error(ErrorCode::kConfig, "spots and sigmas must be strictly positive");
        }
        if (mkt.correlation[i * d + i] != 1.0) {
            throw Error(ErrorCode::kConfig, "correlation diagonal must be 1");
        }
        for (std::size_t j = 0; j < i; ++j) {
            double c = mkt.correlation[i * d + j];
            if (c != mkt.correlation[j * d + i] || !(c >= -1.0 && c <= 1.0)) {
                throw Error(ErrorCode::kConfig, "correlation must be symmetric in [-1,1]");
            }
        }
    }
    if (!std::isfinite(mkt.rate) || !std::isfinite(mkt.dividend_yield)) {
        throw Error(ErrorCode::kConfig, "rate/dividend must be finite");
    }
}

MarketParams market_for(const ProblemSpec& spec) {
    const auto& m = spec.model;
    auto mkt = MarketParams::equicorrelated(spec.dimension, m.spot, m.rate, m.sigma,
                                            m.correlation_rho);
    mkt.dividend_yield = m.dividend_yield;
    return mkt;
}

LocalVolSurface surface_for(const ProblemSpec& spec) {
    LocalVolSurface s;
    s.sigma0 = spec.param("lv_sigma0", spec.model.sigma);
    s.skew_a = spec.param("lv_skew", 0.0);
    s.term_b = spec.param("lv_term", 0.0);
    s.floor = spec.param("lv_floor", 0.01);
    s.cap = spec.param("lv_cap", 2.0);
    s.ref_spot = spec.model.spot;
    return s;
}

}  // namespace riskbench
