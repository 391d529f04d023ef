#include "riskbench/mc_kernels.hpp"
#include "riskbench/pricing.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <omp.h>

namespace riskbench::kernels {

double SampleStats::std_error() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double var = std::max(sum_sq - sum * sum / n, 0.0) / (n - 1.0);
    return std::sqrt(var / n);
}

std::vector<double> cholesky(std::span<const double> matrix, std::size_t d) {
    if (matrix.size() != d * d) throw Error(ErrorCode::kDimension, "cholesky: size mismatch");
    std::vector<double> l(d * d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double pivot = matrix[j * d + j];
        for (std::size_t k = 0; k < j; ++k) pivot -= l[j * d + k] * l[j * d + k];
        if (pivot < -1e-10) {
            throw Error(ErrorCode::kNumeric, "correlation matrix is not positive semi-definite");
        }
        if (pivot <= 1e-14) continue;  // semi-definite direction: column stays zero
        const double root = std::sqrt(pivot);
        l[j * d + j] = root;
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = matrix[i * d + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
            l[i * d + j] = s / root;
        }
    }
    return l;
}

GbmModel GbmModel::from_market(const MarketParams& mkt) {
    GbmModel m;
    const std::size_t d = mkt.dimension();
    m.spot = mkt.spot;
    m.sigma = mkt.sigma;
    m.drift.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        m.drift[i] = mkt.rate - mkt.dividend_yield - 0.5 * mkt.sigma[i] * mkt.sigma[i];
    }
    m.chol = cholesky(mkt.correlation, d);
    return m;
}

void gbm_step(const GbmModel& model, rng::Philox4x32::Key key, std::uint64_t path,
              std::uint32_t lane, double dt, std::span<double> assets, std::span<double> scratch) {
    const std::size_t d = model.dimension();
    auto z = scratch.subspan(0, d);
    rng::NormalStream(key, path, lane).fill(z);
    const double root_dt = std::sqrt(dt);
    for (std::size_t i = 0; i < d; ++i) {
        double w = 0.0;
        const double* row = &model.chol[i * d];
        for (std::size_t k = 0; k <= i; ++k) w += row[k] * z[k];
        assets[i] *= std::exp(model.drift[i] * dt + model.sigma[i] * root_dt * w);
    }
}

namespace {

std::size_t block_count(std::uint64_t n) { return static_cast<std::size_t>((n + kPathBlock - 1) / kPathBlock); }

/// Runs `body(begin, end)` per path block in parallel and folds the
/// per-block results in block order.
template <class Body>
SampleStats blocked_stats(std::uint64_t n, int threads, Body&& body) {
    const std::size_t blocks = block_count(n);
    std::vector<SampleStats> partial(blocks);
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        const std::uint64_t begin = static_cast<std::uint64_t>(b) * kPathBlock;
        const std::uint64_t end = std::min<std::uint64_t>(n, begin + kPathBlock);
        partial[b] = body(begin, end);
    }
    SampleStats total;
    for (const auto& s : partial) {
        total.sum += s.sum;
        total.sum_sq += s.sum_sq;
        total.count += s.count;
    }
    return total;
}

double basket_put_payoff(const GbmModel& model, rng::Philox4x32::Key key, std::uint64_t path,
                         double strike, double maturity, std::vector<double>& assets,
                         std::vector<double>& scratch) {
    std::copy(model.spot.begin(), model.spot.end(), assets.begin());
    gbm_step(model, key, path, 0, maturity, assets, scratch);
    return std::max(strike - basket_average(assets), 0.0);
}

double localvol_terminal(const LocalVolPath& p, const LocalVolSurface& surface,
                         rng::Philox4x32::Key key, std::uint64_t path) {
    rng::NormalStream normals(key, path, 0);
    const double dt = p.maturity / static_cast<double>(p.steps);
    const double root_dt = std::sqrt(dt);
    double x = std::log(p.spot);
    for (std::uint64_t k = 0; k < p.steps; ++k) {
        const double sigma = local_vol(surface, static_cast<double>(k) * dt, std::exp(x));
        x += (p.rate - p.dividend - 0.5 * sigma * sigma) * dt + sigma * root_dt * normals.next();
    }
    return std::exp(x);
}

}  // namespace

SampleStats basket_put_terminal(const GbmModel& model, rng::Philox4x32::Key key, double strike,
                                double maturity, std::uint64_t samples, int threads) {
    const std::size_t d = model.dimension();
    return blocked_stats(samples, threads, [&](std::uint64_t begin, std::uint64_t end) {
        std::vector<double> assets(d), scratch(2 * d);
        SampleStats s;
        for (std::uint64_t p = begin; p < end; ++p) {
            const double v = basket_put_payoff(model, key, p, strike, maturity, assets, scratch);
            s.sum += v;
            s.sum_sq += v * v;
        }
        s.count = end - begin;
        return s;
    });
}

SampleStats basket_put_terminal_reference(const GbmModel& model, rng::Philox4x32::Key key,
                                          double strike, double maturity, std::uint64_t samples) {
    const std::size_t d = model.dimension();
    std::vector<double> assets(d), scratch(2 * d);
    SampleStats s;
    for (std::uint64_t p = 0; p < samples; ++p) {
        const double v = basket_put_payoff(model, key, p, strike, maturity, assets, scratch);
        s.sum += v;
        s.sum_sq += v * v;
    }
    s.count = samples;
    return s;
}

SampleStats localvol_call(const LocalVolPath& path, const LocalVolSurface& surface,
                          rng::Philox4x32::Key key, double strike, std::uint64_t samples,
                          int threads) {
    return blocked_stats(samples, threads, [&](std::uint64_t begin, std::uint64_t end) {
        SampleStats s;
        for (std::uint64_t p = begin; p < end; ++p) {
            const double v = std::max(localvol_terminal(path, surface, key, p) - strike, 0.0);
            s.sum += v;
            s.sum_sq += v * v;
        }
        s.count = end - begin;
        return s;
    });
}

SampleStats localvol_call_reference(const LocalVolPath& path, const LocalVolSurface& surface,
                                    rng::Philox4x32::Key key, double strike,
                                    std::uint64_t samples) {
    SampleStats s;
    for (std::uint64_t p = 0; p < samples; ++p) {
        const double v = std::max(localvol_terminal(path, surface, key, p) - strike, 0.0);
        s.sum += v;
        s.sum_sq += v * v;
    }
    s.count = samples;
    return s;
}

namespace {

void fill_average_path(const GbmModel& model, rng::Philox4x32::Key key, double dt,
                       std::size_t dates, std::uint64_t path, std::vector<double>& assets,
                       std::vector<double>& scratch, double* out) {
    std::copy(model.spot.begin(), model.spot.end(), assets.begin());
    for (std::size_t j = 0; j < dates; ++j) {
        gbm_step(model, key, path, static_cast<std::uint32_t>(j), dt, assets, scratch);
        out[j] = basket_average(assets);
    }
}

}  // namespace

std::vector<double> basket_average_paths(const GbmModel& model, rng::Philox4x32::Key key,
                                         double dt, std::size_t dates, std::uint64_t paths,
                                         int threads) {
    std::vector<double> out(static_cast<std::size_t>(paths) * dates);
    const std::size_t d = model.dimension();
    const std::size_t blocks = block_count(paths);
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1))
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        std::vector<double> assets(d), scratch(2 * d);
        const std::uint64_t begin = static_cast<std::uint64_t>(b) * kPathBlock;
        const std::uint64_t end = std::min<std::uint64_t>(paths, begin + kPathBlock);
        for (std::uint64_t p = begin; p < end; ++p) {
            fill_average_path(model, key, dt, dates, p, assets, scratch, &out[p * dates]);
        }
    }
    return out;
}

std::vector<double> basket_average_paths_reference(const GbmModel& model,
                                                   rng::Philox4x32::Key key, double dt,
                                                   std::size_t dates, std::uint64_t paths) {
    std::vector<double> out(static_cast<std::size_t>(paths) * dates);
    std::vector<double> assets(model.dimension()), scratch(2 * model.dimension());
    for (std::uint64_t p = 0; p < paths; ++p) {
        fill_average_path(model, key, dt, dates, p, assets, scratch, &out[p * dates]);
    }
    return out;
}

namespace {

constexpr std::size_t kBasis = 3;

/// Normal equations of the {1, a, a^2} regression over in-the-money paths.
struct Normal {
    std::array<double, 9> xtx{};
    std::array<double, 3> xty{};
    std::uint64_t itm = 0;

    void add(double a, double y) {
        const std::array<double, 3> phi{1.0, a, a * a};
        for (std::size_t r = 0; r < kBasis; ++r) {
            for (std::size_t c = 0; c < kBasis; ++c) xtx[r * kBasis + c] += phi[r] * phi[c];
            xty[r] += phi[r] * y;
        }
        ++itm;
    }
    void merge(const Normal& o) {
        for (std::size_t i = 0; i < 9; ++i) xtx[i] += o.xtx[i];
        for (std::size_t i = 0; i < 3; ++i) xty[i] += o.xty[i];
        itm += o.itm;
    }
};

/// Gaussian elimination with partial pivoting; false when singular.
bool solve3(std::array<double, 9> m, std::array<double, 3> rhs, std::array<double, 3>& beta) {
    double scale = 0.0;
    for (double v : m) scale = std::max(scale, std::abs(v));
    for (std::size_t col = 0; col < kBasis; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < kBasis; ++r) {
            if (std::abs(m[r * 3 + col]) > std::abs(m[piv * 3 + col])) piv = r;
        }
        if (std::abs(m[piv * 3 + col]) <= 1e-13 * scale) return false;
        if (piv != col) {
            for (std::size_t c = 0; c < kBasis; ++c) std::swap(m[col * 3 + c], m[piv * 3 + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t r = col + 1; r < kBasis; ++r) {
            const double f = m[r * 3 + col] / m[col * 3 + col];
            for (std::size_t c = col; c < kBasis; ++c) m[r * 3 + c] -= f * m[col * 3 + c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (std::size_t r = kBasis; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t c = r + 1; c < kBasis; ++c) s -= m[r * 3 + c] * beta[c];
        beta[r] = s / m[r * 3 + r];
    }
    return true;
}

struct LsmcState {
    std::vector<double> cash;          // exercise value at the stopping date
    std::vector<std::uint32_t> stop;   // stopping date index (1-based, dates = maturity)
    std::vector<double> discount;      // discount[k] = exp(-r * k * dt)
    std::vector<double> growth;        // growth[k] = exp(+r * k * dt)
};

LsmcState init_state(std::span<const double> averages, std::size_t dates, double dt,
                     double strike, double rate) {
    const std::size_t paths = averages.size() / dates;
    LsmcState st;
    st.cash.resize(paths);
    st.stop.assign(paths, static_cast<std::uint32_t>(dates));
    st.discount.resize(dates + 1);
    st.growth.resize(dates + 1);
    for (std::size_t k = 0; k <= dates; ++k) {
        st.discount[k] = std::exp(-rate * static_cast<double>(k) * dt);
        st.growth[k] = std::exp(rate * static_cast<double>(k) * dt);
    }
    for (std::size_t p = 0; p < paths; ++p) {
        st.cash[p] = std::max(strike - averages[p * dates + dates - 1], 0.0);
    }
    return st;
}

/// Updates the stopping rule at date index j (1-based) for one path.
inline void decide(LsmcState& st, std::span<const double> averages, std::size_t dates,
                   std::size_t j, std::size_t p, double strike, bool degraded,
                   const std::array<double, 3>& beta) {
    const double avg = averages[p * dates + j - 1];
    const double exercise = strike - avg;
    if (exercise <= 0.0) return;
    bool stop_now = degraded;
    if (!degraded) {
        const double a = avg / strike;
        const double continuation = beta[0] + beta[1] * a + beta[2] * a * a;
        stop_now = exercise >= continuation;
    }
    if (stop_now) {
        st.cash[p] = exercise;
        st.stop[p] = static_cast<std::uint32_t>(j);
    }
}

inline void regress_one(Normal& n, const LsmcState& st, std::span<const double> averages,
                        std::size_t dates, std::size_t j, std::size_t p, double strike) {
    const double avg = averages[p * dates + j - 1];
    if (strike - avg <= 0.0) return;
    n.add(avg / strike, st.cash[p] * st.discount[st.stop[p] - j]);
}

inline double discounted_to_maturity(const LsmcState& st, std::size_t dates, std::size_t p) {
    return st.cash[p] * st.growth[dates - st.stop[p]];
}

}  // namespace

LsmcEstimate lsmc_put(std::span<const double> averages, std::size_t dates, double dt,
                      double strike, double rate, int threads) {
    const std::size_t paths = averages.size() / dates;
    const std::size_t blocks = block_count(paths);
    LsmcState st = init_state(averages, dates, dt, strike, rate);
    LsmcEstimate est;
    std::vector<Normal> partial(blocks);
    const int nthreads = std::max(threads, 1);

    for (std::size_t j = dates - 1; j >= 1; --j) {
#pragma omp parallel for schedule(static) num_threads(nthreads)
        for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
            Normal n;
            const std::size_t end = std::min(paths, (b + 1) * kPathBlock);
            for (std::size_t p = b * kPathBlock; p < end; ++p) regress_one(n, st, averages, dates, j, p, strike);
            partial[b] = n;
        }
        Normal total;
        for (const auto& n : partial) total.merge(n);

        std::array<double, 3> beta{};
        const bool degraded = total.itm < kBasis || !solve3(total.xtx, total.xty, beta);
        if (degraded && total.itm > 0) ++est.degraded_dates;

#pragma omp parallel for schedule(static) num_threads(nthreads)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(paths); ++p) {
            decide(st, averages, dates, j, p, strike, degraded, beta);
        }
    }

    est.stats = blocked_stats(paths, threads, [&](std::uint64_t begin, std::uint64_t end) {
        SampleStats s;
        for (std::uint64_t p = begin; p < end; ++p) {
            const double v = discounted_to_maturity(st, dates, p);
            s.sum += v;
            s.sum_sq += v * v;
        }
        s.count = end - begin;
        return s;
    });
    return est;
}

LsmcEstimate lsmc_put_reference(std::span<const double> averages, std::size_t dates, double dt,
                                double strike, double rate) {
    const std::size_t paths = averages.size() / dates;
    LsmcState st = init_state(averages, dates, dt, strike, rate);
    LsmcEstimate est;
    for (std::size_t j = dates - 1; j >= 1; --j) {
        Normal n;
        for (std::size_t p = 0; p < paths; ++p) regress_one(n, st, averages, dates, j, p, strike);
        std::array<double, 3> beta{};
        const bool degraded = n.itm < kBasis || !solve3(n.xtx, n.xty, beta);
        if (degraded && n.itm > 0) ++est.degraded_dates;
        for (std::size_t p = 0; p < paths; ++p) decide(st, averages, dates, j, p, strike, degraded, beta);
    }
    for (std::size_t p = 0; p < paths; ++p) {
        const double v = discounted_to_maturity(st, dates, p);
        est.stats.sum += v;
        est.stats.sum_sq += v * v;
    }
    est.stats.count = paths;
    return est;
}

}  // namespace riskbench::kernels
