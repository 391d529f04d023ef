#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riskbench/error.hpp"

namespace riskbench {

/// Product/method pairing of one pricing job. Numeric values are part of the
/// on-disk format and must not be renumbered.
enum class ProblemKind : std::uint32_t {
    kVanillaCall = 1,
    kVanillaPut = 2,
    kBarrierDownOutCall = 3,
    kAmericanPutPde = 4,
    kBasketPutMc = 5,
    kLocalVolCallMc = 6,
    kAmericanBasketPutLsmc = 7,
};

inline constexpr ProblemKind kAllKinds[] = {
    ProblemKind::kVanillaCall,        ProblemKind::kVanillaPut,
    ProblemKind::kBarrierDownOutCall, ProblemKind::kAmericanPutPde,
    ProblemKind::kBasketPutMc,        ProblemKind::kLocalVolCallMc,
    ProblemKind::kAmericanBasketPutLsmc,
};

std::string_view kind_name(ProblemKind kind);
std::optional<ProblemKind> kind_from_name(std::string_view name);
bool is_valid_kind(std::uint32_t raw);
bool is_monte_carlo(ProblemKind kind);

/// Scalar model description stored with each problem. Multi-asset problems
/// expand it to identical assets with equicorrelation `correlation_rho`.
struct ModelParams {
    double spot = 100.0;
    double rate = 0.05;
    double sigma = 0.2;
    double correlation_rho = 0.3;
    double dividend_yield = 0.0;

    bool operator==(const ModelParams&) const = default;
};

/// One pricing job.
struct ProblemSpec {
    std::string id;
    ProblemKind kind = ProblemKind::kVanillaCall;
    double strike = 100.0;
    double maturity = 1.0;
    std::optional<double> barrier;  // present iff kind == kBarrierDownOutCall
    std::uint32_t dimension = 1;
    ModelParams model;
    /// Named numeric settings; scalars are one-element vectors.
    std::map<std::string, std::vector<double>> method_params;
    std::uint64_t seed = 0;

    double param(std::string_view name, double fallback) const;
    void set_param(const std::string& name, double value) { method_params[name] = {value}; }

    bool operator==(const ProblemSpec&) const = default;
};

/// Throws Error(kInvariant) naming the first violated invariant.
void validate(const ProblemSpec& spec);

/// Market state for d assets. `correlation` is row-major d x d.
struct MarketParams {
    std::vector<double> spot;
    std::vector<double> sigma;
    std::vector<double> correlation;
    double rate = 0.0;
    double dividend_yield = 0.0;

    std::size_t dimension() const { return spot.size(); }
    bool scalar() const { return spot.size() == 1; }

    static MarketParams scalar_market(double spot, double rate, double sigma);
    static MarketParams equicorrelated(std::size_t d, double spot, double rate, double sigma,
                                       double rho);
};

/// Shape checks only (dimensions, positivity, unit diagonal, symmetry, range).
/// Positive semi-definiteness is checked by the factorization that needs it.
void validate(const MarketParams& mkt);

MarketParams market_for(const ProblemSpec& spec);

/// Local volatility sigma(t, S) = clip(sigma0 + skew_a * ln(S/ref_spot)^2 + term_b * t,
/// floor, cap).
struct LocalVolSurface {
    double sigma0 = 0.2;
    double skew_a = 0.0;
    double term_b = 0.0;
    double floor = 0.01;
    double cap = 2.0;
    double ref_spot = 100.0;
};

LocalVolSurface surface_for(const ProblemSpec& spec);

struct PricingResult {
    std::string problem_id;
    double price = 0.0;
    std::optional<double> std_error;
    std::optional<double> delta;
    double wall_time = 0.0;
    /// Exercise dates where regression was skipped for lack of in-the-money paths.
    std::uint32_t degraded_dates = 0;
    ErrorCode status = ErrorCode::kOk;
    std::string message;

    bool ok() const { return status == ErrorCode::kOk; }
    bool operator==(const PricingResult&) const = default;
};

}  // namespace riskbench
