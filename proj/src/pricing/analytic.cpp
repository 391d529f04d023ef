#include <algorithm>
#include <cmath>

#include "detail.hpp"

namespace riskbench {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

namespace {

struct D12 {
    double d1, d2;
};

D12 bs_d(double spot, double strike, double rate, double div, double sigma, double t) {
    const double vol = sigma * std::sqrt(t);
    const double d1 = (std::log(spot / strike) + (rate - div + 0.5 * sigma * sigma) * t) / vol;
    return {d1, d1 - vol};
}

}  // namespace

double bs_call(double spot, double strike, double rate, double div, double sigma, double t) {
    const auto [d1, d2] = bs_d(spot, strike, rate, div, sigma, t);
    return spot * std::exp(-div * t) * norm_cdf(d1) - strike * std::exp(-rate * t) * norm_cdf(d2);
}

double bs_put(double spot, double strike, double rate, double div, double sigma, double t) {
    const auto [d1, d2] = bs_d(spot, strike, rate, div, sigma, t);
    return strike * std::exp(-rate * t) * norm_cdf(-d2) - spot * std::exp(-div * t) * norm_cdf(-d1);
}

PricingResult bs_vanilla_price(const ProblemSpec& spec, const MarketParams& mkt) {
    detail::Stopwatch clock;
    if (spec.kind != ProblemKind::kVanillaCall && spec.kind != ProblemKind::kVanillaPut) {
        throw Error(ErrorCode::kConfig, "bs_vanilla_price: not a vanilla problem");
    }
    detail::require_scalar(mkt, "bs_vanilla_price");

    const double s = mkt.spot[0], k = spec.strike, r = mkt.rate, q = mkt.dividend_yield;
    const double sigma = mkt.sigma[0], t = spec.maturity;
    const auto [d1, d2] = bs_d(s, k, r, q, sigma, t);
    const double df_q = std::exp(-q * t);

    PricingResult out;
    out.problem_id = spec.id;
    if (spec.kind == ProblemKind::kVanillaCall) {
        out.price = bs_call(s, k, r, q, sigma, t);
        out.delta = df_q * norm_cdf(d1);
    } else {
        out.price = bs_put(s, k, r, q, sigma, t);
        out.delta = -df_q * norm_cdf(-d1);
    }
    out.wall_time = clock.seconds();
    return out;
}

namespace {

// Reiner-Rubinstein down-and-out call, continuous monitoring.
double down_out_call(double s, double k, double b, double r, double q, double sigma, double t) {
    if (b >= s) return 0.0;
    const double vol = sigma * std::sqrt(t);
    const double lambda = (r - q + 0.5 * sigma * sigma) / (sigma * sigma);
    const double df_r = std::exp(-r * t), df_q = std::exp(-q * t);
    const double ratio = b / s;
    const double pow_a = std::pow(ratio, 2.0 * lambda);
    const double pow_b = std::pow(ratio, 2.0 * lambda - 2.0);

    if (k >= b) {
        const double y = std::log(b * b / (s * k)) / vol + lambda * vol;
        const double down_in = s * df_q * pow_a * norm_cdf(y) - k * df_r * pow_b * norm_cdf(y - vol);
        return std::max(bs_call(s, k, r, q, sigma, t) - down_in, 0.0);
    }
    const double x1 = std::log(s / b) / vol + lambda * vol;
    const double y1 = std::log(b / s) / vol + lambda * vol;
    const double value = s * df_q * norm_cdf(x1) - k * df_r * norm_cdf(x1 - vol) -
                         s * df_q * pow_a * norm_cdf(y1) + k * df_r * pow_b * norm_cdf(y1 - vol);
    return std::max(value, 0.0);
}

}  // namespace

PricingResult closed_form_down_out_call(const ProblemSpec& spec, const MarketParams& mkt) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kBarrierDownOutCall, "closed_form_down_out_call");
    detail::require_scalar(mkt, "closed_form_down_out_call");
    if (!spec.barrier) throw Error(ErrorCode::kConfig, "closed_form_down_out_call: no barrier");

    const double s = mkt.spot[0], k = spec.strike, b = *spec.barrier;
    const double r = mkt.rate, q = mkt.dividend_yield, sigma = mkt.sigma[0], t = spec.maturity;

    PricingResult out;
    out.problem_id = spec.id;
    out.price = down_out_call(s, k, b, r, q, sigma, t);
    if (b < s) {
        const double h = 1e-4 * s;
        const double down = std::max(s - h, b);
        out.delta = (down_out_call(s + h, k, b, r, q, sigma, t) -
                     down_out_call(down, k, b, r, q, sigma, t)) / (s + h - down);
    } else {
        out.delta = 0.0;
    }
    out.wall_time = clock.seconds();
    return out;
}

void validate(const LocalVolSurface& surface) {
    if (!(surface.floor > 0.0) || !(surface.floor <= surface.cap) || !std::isfinite(surface.cap)) {
        throw Error(ErrorCode::kConfig, "local vol surface needs 0 < floor <= cap");
    }
    if (!(surface.sigma0 > 0.0) || !(surface.ref_spot > 0.0) || !std::isfinite(surface.skew_a) ||
        !std::isfinite(surface.term_b)) {
        throw Error(ErrorCode::kConfig, "local vol surface parameters invalid");
    }
}

double local_vol(const LocalVolSurface& surface, double t, double spot) {
    const double m = std::log(spot / surface.ref_spot);
    return std::clamp(surface.sigma0 + surface.skew_a * m * m + surface.term_b * t, surface.floor,
                      surface.cap);
}

PricingResult price(const ProblemSpec& spec, const ExecConfig& exec) {
    validate(spec);
    const MarketParams mkt = market_for(spec);
    switch (spec.kind) {
        case ProblemKind::kVanillaCall:
        case ProblemKind::kVanillaPut: return bs_vanilla_price(spec, mkt);
        case ProblemKind::kBarrierDownOutCall: return pde_barrier_down_out_call(spec, mkt);
        case ProblemKind::kAmericanPutPde: return pde_american_put(spec, mkt);
        case ProblemKind::kBasketPutMc: return mc_basket_put(spec, mkt, exec);
        case ProblemKind::kLocalVolCallMc:
            return mc_localvol_call(spec, mkt, surface_for(spec), exec);
        case ProblemKind::kAmericanBasketPutLsmc: return lsmc_american_basket_put(spec, mkt, exec);
    }
    throw Error(ErrorCode::kConfig, "unknown problem kind");
}

}  // namespace riskbench
