#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "detail.hpp"

namespace riskbench {
namespace {

constexpr double kTwoDays = 2.0 / 365.0;

/// Uniform log-price grid x_j = lo + j*dx, j = 0..n-1.
struct LogGrid {
    double lo = 0.0;
    double dx = 0.0;
    std::size_t n = 0;

    double x(std::size_t j) const { return lo + static_cast<double>(j) * dx; }
    double hi() const { return x(n - 1); }
};

/// Tridiagonal rows (sub, diag, sup) for interior nodes 1..n-2.
struct Tridiag {
    std::vector<double> sub, diag, sup;
};

/// Value at an interior point by 4-point Lagrange interpolation; also returns dV/dx.
std::pair<double, double> interpolate(const LogGrid& g, const std::vector<double>& v, double x) {
    const double pos = (x - g.lo) / g.dx;
    long j = static_cast<long>(std::floor(pos)) - 1;
    j = std::clamp(j, 0L, static_cast<long>(g.n) - 4);
    double value = 0.0, slope = 0.0;
    for (long a = 0; a < 4; ++a) {
        const double xa = g.x(j + a);
        double basis = 1.0, dbasis = 0.0;
        for (long b = 0; b < 4; ++b) {
            if (b == a) continue;
            const double xb = g.x(j + b);
            double term = 1.0;
            for (long c = 0; c < 4; ++c) {
                if (c == a || c == b) continue;
                term *= (x - g.x(j + c)) / (xa - g.x(j + c));
            }
            dbasis += term / (xa - xb);
            basis *= (x - xb) / (xa - xb);
        }
        value += basis * v[j + a];
        slope += dbasis * v[j + a];
    }
    return {value, slope};
}

void thomas(const Tridiag& m, std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    std::vector<double> c(n);
    double denom = m.diag[0];
    c[0] = m.sup[0] / denom;
    rhs[0] /= denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = m.diag[i] - m.sub[i] * c[i - 1];
        c[i] = m.sup[i] / denom;
        rhs[i] = (rhs[i] - m.sub[i] * rhs[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

/// Brennan-Schwartz: eliminate from the top of the grid, then substitute upward
/// from the low-price end while projecting onto the payoff. Exact for a put,
/// whose exercise region is a single interval at low prices.
void brennan_schwartz(const Tridiag& m, std::vector<double>& rhs, const std::vector<double>& payoff) {
    const std::size_t n = rhs.size();
    std::vector<double> diag(m.diag);
    for (std::size_t i = n - 1; i-- > 0;) {
        const double f = m.sup[i] / diag[i + 1];
        diag[i] -= f * m.sub[i + 1];
        rhs[i] -= f * rhs[i + 1];
    }
    rhs[0] = std::max(rhs[0] / diag[0], payoff[0]);
    for (std::size_t i = 1; i < n; ++i) {
        rhs[i] = std::max((rhs[i] - m.sub[i] * rhs[i - 1]) / diag[i], payoff[i]);
    }
}

struct PsorSettings {
    double omega;
    double tol;
    long max_iter;
};

void psor(const Tridiag& m, const std::vector<double>& rhs, const std::vector<double>& payoff,
          std::vector<double>& v, const PsorSettings& cfg) {
    const std::size_t n = rhs.size();
    for (long iter = 0; iter < cfg.max_iter; ++iter) {
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double resid = rhs[i] - m.diag[i] * v[i];
            if (i > 0) resid -= m.sub[i] * v[i - 1];
            if (i + 1 < n) resid -= m.sup[i] * v[i + 1];
            const double next = std::max(payoff[i], v[i] + cfg.omega * resid / m.diag[i]);
            change = std::max(change, std::abs(next - v[i]));
            v[i] = next;
        }
        if (change < cfg.tol) return;
    }
    throw Error(ErrorCode::kNumeric, "PSOR did not converge within " +
                                         std::to_string(cfg.max_iter) + " iterations");
}

/// Replaces the payoff at the node whose cell holds the strike by its cell
/// average, which removes the grid-position dependence of the kink error.
void average_kink_cell(const LogGrid& g, std::vector<double>& payoff, double strike, bool call) {
    const double k = std::log(strike);
    const double j_real = (k - g.lo) / g.dx;
    if (j_real < 0.5 || j_real > static_cast<double>(g.n) - 1.5) return;
    const auto j = static_cast<std::size_t>(std::lround(j_real));
    const double a = g.x(j) - 0.5 * g.dx, b = g.x(j) + 0.5 * g.dx;
    const double integral = call ? std::exp(b) - strike - strike * (b - k)
                                 : strike * (k - a) - (strike - std::exp(a));
    payoff[j] = integral / g.dx;
}

enum class Projection { kNone, kBrennanSchwartz, kPsor };

struct Problem {
    LogGrid grid;
    double sigma, rate, div, maturity, dt;
    long rannacher_steps;
    std::vector<double> terminal;          // payoff at every node
    std::vector<double> intrinsic;         // early-exercise floor; terminal if empty
    std::function<double(double)> lower;   // boundary value at j = 0, given tau
    std::function<double(double)> upper;   // boundary value at j = n-1, given tau
    Projection projection = Projection::kNone;
    PsorSettings psor{1.5, 1e-12, 10000};
};

/// Theta-scheme march from tau = 0 (payoff) to tau = maturity.
std::vector<double> solve(const Problem& p) {
    const LogGrid& g = p.grid;
    const std::size_t interior = g.n - 2;
    const double a = 0.5 * p.sigma * p.sigma;
    const double b = p.rate - p.div - a;
    const double lo = a / (g.dx * g.dx) - b / (2.0 * g.dx);
    const double mid = -2.0 * a / (g.dx * g.dx) - p.rate;
    const double up = a / (g.dx * g.dx) + b / (2.0 * g.dx);

    std::vector<double> v = p.terminal;
    const auto& floor = p.intrinsic.empty() ? p.terminal : p.intrinsic;
    std::vector<double> rhs(interior), payoff(floor.begin() + 1, floor.end() - 1);
    Tridiag m{std::vector<double>(interior), std::vector<double>(interior),
              std::vector<double>(interior)};

    auto step = [&](double tau, double h, double theta) {
        for (std::size_t i = 0; i < interior; ++i) {
            const std::size_t j = i + 1;
            rhs[i] = v[j] + (1.0 - theta) * h * (lo * v[j - 1] + mid * v[j] + up * v[j + 1]);
            m.sub[i] = -theta * h * lo;
            m.diag[i] = 1.0 - theta * h * mid;
            m.sup[i] = -theta * h * up;
        }
        const double g0 = p.lower(tau + h), g1 = p.upper(tau + h);
        rhs.front() += theta * h * lo * g0;
        rhs.back() += theta * h * up * g1;

        switch (p.projection) {
            case Projection::kNone: thomas(m, rhs); break;
            case Projection::kBrennanSchwartz: brennan_schwartz(m, rhs, payoff); break;
            case Projection::kPsor: {
                std::vector<double> guess(v.begin() + 1, v.end() - 1);
                psor(m, rhs, payoff, guess, p.psor);
                rhs.swap(guess);
                break;
            }
        }
        v.front() = g0;
        v.back() = g1;
        std::copy(rhs.begin(), rhs.end(), v.begin() + 1);
    };

    const long steps = std::max(1L, static_cast<long>(std::ceil(p.maturity / p.dt - 1e-9)));
    const double h = p.maturity / static_cast<double>(steps);
    double tau = 0.0;
    for (long n = 0; n < steps; ++n) {
        if (n < p.rannacher_steps) {
            // Two implicit half-steps damp the payoff kink before Crank-Nicolson.
            step(tau, 0.5 * h, 1.0);
            step(tau + 0.5 * h, 0.5 * h, 1.0);
        } else {
            step(tau, h, 0.5);
        }
        tau = static_cast<double>(n + 1) * h;
    }
    return v;
}

struct PdeSettings {
    std::size_t nodes;
    double dt;
    double width;
    long rannacher;
};

PdeSettings read_settings(const ProblemSpec& spec) {
    PdeSettings s;
    s.nodes = static_cast<std::size_t>(detail::count_param(spec, "space_nodes", 400, 5));
    s.dt = spec.param("dt", kTwoDays);
    s.width = spec.param("width_stddev", 5.0);
    s.rannacher = detail::count_param(spec, "rannacher_steps", 2, 0);
    if (!(s.dt > 0.0)) throw Error(ErrorCode::kConfig, "PDE time step must be > 0");
    return s;
}

LogGrid make_grid(double lo, double hi, std::size_t nodes, double log_spot) {
    if (!(hi > lo) || !(log_spot > lo) || !(log_spot < hi)) {
        throw Error(ErrorCode::kConfig, "PDE grid does not strictly contain the spot");
    }
    return LogGrid{lo, (hi - lo) / static_cast<double>(nodes - 1), nodes};
}

PricingResult finish(const ProblemSpec& spec, const LogGrid& g, const std::vector<double>& v,
                     double spot, const detail::Stopwatch& clock) {
    const auto [value, slope] = interpolate(g, v, std::log(spot));
    PricingResult out;
    out.problem_id = spec.id;
    out.price = value;
    out.delta = slope / spot;
    out.wall_time = clock.seconds();
    if (!std::isfinite(out.price)) throw Error(ErrorCode::kNumeric, "PDE produced a non-finite price");
    return out;
}

}  // namespace

PricingResult pde_barrier_down_out_call(const ProblemSpec& spec, const MarketParams& mkt) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kBarrierDownOutCall, "pde_barrier_down_out_call");
    detail::require_scalar(mkt, "pde_barrier_down_out_call");
    if (!spec.barrier) throw Error(ErrorCode::kConfig, "pde_barrier_down_out_call: no barrier");

    const double spot = mkt.spot[0], strike = spec.strike, barrier = *spec.barrier;
    const double sigma = mkt.sigma[0], t = spec.maturity;
    if (barrier >= spot) {
        PricingResult out;
        out.problem_id = spec.id;
        out.delta = 0.0;
        out.wall_time = clock.seconds();
        return out;
    }

    const auto cfg = read_settings(spec);
    Problem p;
    p.grid = make_grid(std::log(barrier), std::log(spot) + cfg.width * sigma * std::sqrt(t),
                       cfg.nodes, std::log(spot));
    p.sigma = sigma;
    p.rate = mkt.rate;
    p.div = mkt.dividend_yield;
    p.maturity = t;
    p.dt = cfg.dt;
    p.rannacher_steps = cfg.rannacher;
    p.terminal.resize(cfg.nodes);
    for (std::size_t j = 0; j < cfg.nodes; ++j) {
        p.terminal[j] = std::max(std::exp(p.grid.x(j)) - strike, 0.0);
    }
    average_kink_cell(p.grid, p.terminal, strike, true);
    p.terminal.front() = 0.0;
    const double s_max = std::exp(p.grid.hi());
    p.lower = [](double) { return 0.0; };
    p.upper = [&](double tau) {
        return std::max(s_max * std::exp(-p.div * tau) - strike * std::exp(-p.rate * tau), 0.0);
    };
    return finish(spec, p.grid, solve(p), spot, clock);
}

PricingResult pde_american_put(const ProblemSpec& spec, const MarketParams& mkt) {
    detail::Stopwatch clock;
    detail::require_kind(spec, ProblemKind::kAmericanPutPde, "pde_american_put");
    detail::require_scalar(mkt, "pde_american_put");

    const double spot = mkt.spot[0], strike = spec.strike, sigma = mkt.sigma[0];
    const double t = spec.maturity;
    const auto cfg = read_settings(spec);
    const double half_width = cfg.width * sigma * std::sqrt(t);

    Problem p;
    p.grid = make_grid(std::log(spot) - half_width, std::log(spot) + half_width, cfg.nodes,
                       std::log(spot));
    p.sigma = sigma;
    p.rate = mkt.rate;
    p.div = mkt.dividend_yield;
    p.maturity = t;
    p.dt = cfg.dt;
    p.rannacher_steps = cfg.rannacher;
    p.terminal.resize(cfg.nodes);
    for (std::size_t j = 0; j < cfg.nodes; ++j) {
        p.terminal[j] = std::max(strike - std::exp(p.grid.x(j)), 0.0);
    }
    p.intrinsic = p.terminal;
    average_kink_cell(p.grid, p.terminal, strike, false);
    const double s_min = std::exp(p.grid.lo);
    p.lower = [&](double) { return std::max(strike - s_min, 0.0); };
    p.upper = [](double) { return 0.0; };

    const long solver = detail::count_param(spec, "american_solver", 0, 0);
    if (solver > 1) throw Error(ErrorCode::kConfig, "american_solver must be 0 or 1");
    p.projection = solver == 0 ? Projection::kBrennanSchwartz : Projection::kPsor;
    p.psor.omega = spec.param("psor_omega", 1.5);
    p.psor.tol = spec.param("psor_tol", 1e-12);
    p.psor.max_iter = detail::count_param(spec, "psor_max_iter", 10000, 1);
    if (!(p.psor.omega > 0.0 && p.psor.omega < 2.0)) {
        throw Error(ErrorCode::kConfig, "psor_omega must lie in (0, 2)");
    }
    return finish(spec, p.grid, solve(p), spot, clock);
}

}  // namespace riskbench
