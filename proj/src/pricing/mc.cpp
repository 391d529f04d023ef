#include <cmath>

#include "detail.hpp"
#include "riskbench/mc_kernels.hpp"
#include "riskbench/rng.hpp"

namespace riskbench {
namespace {

PricingResult from_stats(const ProblemSpec& spec, const kernels::SampleStats& stats,
                         double discount, const detail::Stopwatch& clock) {
    PricingResult out;
    out.problem_id = spec.id;
    out.price = discount * stats.mean();
    out.std_error = discount * stats.std_error();
    out.wall_time = clock.seconds();
    if (!std::isfinite(out.price)) throw Error(ErrorCode::kNumeric, "Monte Carlo price not finite");
    return out;
}

}  // namespace

PricingResult mc_basket_put(const ProblemSpec& spec, const MarketParams& mkt,
                            const ExecConfig& exec) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kBasketPutMc, "mc_basket_put");
    validate(mkt);
    if (mkt.dimension() != spec.dimension) {
        throw Error(ErrorCode::kDimension, "mc_basket_put: market dimension != problem dimension");
    }
    const auto samples = static_cast<std::uint64_t>(detail::count_param(spec, "samples", 1e6, 2));
    const auto model = kernels::GbmModel::from_market(mkt);
    const auto key = rng::stream_key(spec.id, spec.seed);
    const auto stats = kernels::basket_put_terminal(model, key, spec.strike, spec.maturity,
                                                    samples, exec.threads);
    return from_stats(spec, stats, std::exp(-mkt.rate * spec.maturity), clock);
}

PricingResult mc_localvol_call(const ProblemSpec& spec, const MarketParams& mkt,
                               const LocalVolSurface& surface, const ExecConfig& exec) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kLocalVolCallMc, "mc_localvol_call");
    detail::require_scalar(mkt, "mc_localvol_call");
    validate(surface);
    const auto samples = static_cast<std::uint64_t>(detail::count_param(spec, "samples", 1e6, 2));
    const double per_year = spec.param("steps_per_year", 100.0);
    if (!(per_year > 0.0)) throw Error(ErrorCode::kConfig, "steps_per_year must be > 0");

    kernels::LocalVolPath path;
    path.spot = mkt.spot[0];
    path.rate = mkt.rate;
    path.dividend = mkt.dividend_yield;
    path.maturity = spec.maturity;
    path.steps = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(per_year * spec.maturity - 1e-9)));
    const auto key = rng::stream_key(spec.id, spec.seed);
    const auto stats =
        kernels::localvol_call(path, surface, key, spec.strike, samples, exec.threads);
    return from_stats(spec, stats, std::exp(-mkt.rate * spec.maturity), clock);
}

PricingResult lsmc_american_basket_put(const ProblemSpec& spec, const MarketParams& mkt,
                                       const ExecConfig& exec) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kAmericanBasketPutLsmc, "lsmc_american_basket_put");
    validate(mkt);
    if (mkt.dimension() != spec.dimension) {
        throw Error(ErrorCode::kDimension, "lsmc: market dimension != problem dimension");
    }
    const auto paths = static_cast<std::uint64_t>(detail::count_param(spec, "paths", 1e5, 2));
    const double per_year = spec.param("exercise_per_year", 10.0);
    if (!(per_year > 0.0)) throw Error(ErrorCode::kConfig, "exercise_per_year must be > 0");
    const auto dates = static_cast<std::size_t>(
        std::max(1.0, std::round(per_year * spec.maturity)));
    const double dt = spec.maturity / static_cast<double>(dates);

    const auto model = kernels::GbmModel::from_market(mkt);
    const auto key = rng::stream_key(spec.id, spec.seed);
    const auto averages =
        kernels::basket_average_paths(model, key, dt, dates, paths, exec.threads);
    const auto est = kernels::lsmc_put(averages, dates, dt, spec.strike, mkt.rate, exec.threads);

    auto out = from_stats(spec, est.stats, std::exp(-mkt.rate * spec.maturity), clock);
    out.degraded_dates = est.degraded_dates;
    return out;
}

}  // namespace riskbench
