#pragma once

// Monte Carlo path kernels. Each kernel comes in two flavours:
//   * the production kernel, OpenMP-parallel over fixed-size path blocks and
//     reduced in block order, so its output does not depend on the thread count;
//   * a plain serial reference loop kept for tests and benchmarks.
// Both draw the same normals (counter-based, keyed per problem), so they agree
// up to floating-point summation order.

#include <cstdint>
#include <span>
#include <vector>

#include "riskbench/rng.hpp"
#include "riskbench/types.hpp"

namespace riskbench::kernels {

inline constexpr std::size_t kPathBlock = 1024;

struct SampleStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t count = 0;

    double mean() const { return sum / static_cast<double>(count); }
    /// Standard error of the mean.
    double std_error() const;
};

/// Lower-triangular Cholesky factor (row-major d x d) of a PSD matrix.
/// Zero pivots are accepted (semi-definite); negative ones throw kNumeric.
std::vector<double> cholesky(std::span<const double> matrix, std::size_t d);

/// Correlated geometric Brownian motion for d assets.
struct GbmModel {
    std::vector<double> spot;
    std::vector<double> drift;  // r - q - sigma^2/2 per asset
    std::vector<double> sigma;
    std::vector<double> chol;   // Cholesky factor of the correlation
    std::size_t dimension() const { return spot.size(); }

    static GbmModel from_market(const MarketParams& mkt);
};

/// Advances `assets` by one exact lognormal step of length dt using the
/// normals of (path, lane). `scratch` must hold 2*d doubles.
void gbm_step(const GbmModel& model, rng::Philox4x32::Key key, std::uint64_t path,
              std::uint32_t lane, double dt, std::span<double> assets, std::span<double> scratch);

inline double basket_average(std::span<const double> assets) {
    double s = 0.0;
    for (double a : assets) s += a;
    return s / static_cast<double>(assets.size());
}

/// Undiscounted (K - mean of assets at T)+ statistics over `samples` paths.
SampleStats basket_put_terminal(const GbmModel& model, rng::Philox4x32::Key key, double strike,
                                double maturity, std::uint64_t samples, int threads);
SampleStats basket_put_terminal_reference(const GbmModel& model, rng::Philox4x32::Key key,
                                          double strike, double maturity, std::uint64_t samples);

struct LocalVolPath {
    double spot;
    double rate;
    double dividend;
    double maturity;
    std::uint64_t steps;
};

/// Undiscounted (S_T - K)+ statistics under an Euler log-scheme in local vol.
SampleStats localvol_call(const LocalVolPath& path, const LocalVolSurface& surface,
                          rng::Philox4x32::Key key, double strike, std::uint64_t samples,
                          int threads);
SampleStats localvol_call_reference(const LocalVolPath& path, const LocalVolSurface& surface,
                                    rng::Philox4x32::Key key, double strike,
                                    std::uint64_t samples);

/// Basket averages at dates dt, 2dt, ..., dates*dt; row-major [path][date].
std::vector<double> basket_average_paths(const GbmModel& model, rng::Philox4x32::Key key,
                                         double dt, std::size_t dates, std::uint64_t paths,
                                         int threads);
std::vector<double> basket_average_paths_reference(const GbmModel& model,
                                                   rng::Philox4x32::Key key, double dt,
                                                   std::size_t dates, std::uint64_t paths);

/// Least-squares result of the Longstaff-Schwartz backward induction.
struct LsmcEstimate {
    SampleStats stats;            // of cash flows discounted to maturity
    std::uint32_t degraded_dates = 0;
};

/// Bermudan put on the basket average with exercise at dates dt..dates*dt,
/// continuation regressed on {1, A, A^2} over in-the-money paths.
LsmcEstimate lsmc_put(std::span<const double> averages, std::size_t dates, double dt,
                      double strike, double rate, int threads);
LsmcEstimate lsmc_put_reference(std::span<const double> averages, std::size_t dates, double dt,
                                double strike, double rate);

}  // namespace riskbench::kernels
