#pragma once

#include "riskbench/types.hpp"

namespace riskbench {

/// Thread count for the data-parallel Monte Carlo kernels. Results are
/// bitwise identical for every value; 1 keeps a worker single-threaded.
struct ExecConfig {
    int threads = 1;
};

// Closed forms.
PricingResult bs_vanilla_price(const ProblemSpec& spec, const MarketParams& mkt);
PricingResult closed_form_down_out_call(const ProblemSpec& spec, const MarketParams& mkt);

// Finite differences in log-price.
//   method_params: space_nodes (400), dt (2/365), width_stddev (5),
//   rannacher_steps (2), american_solver (0 = Brennan-Schwartz, 1 = PSOR),
//   psor_omega (1.5), psor_tol (1e-12), psor_max_iter (10000)
PricingResult pde_barrier_down_out_call(const ProblemSpec& spec, const MarketParams& mkt);
PricingResult pde_american_put(const ProblemSpec& spec, const MarketParams& mkt);

// Monte Carlo.
//   basket:    samples (1e6)
//   local vol: samples (1e6), steps_per_year (100), lv_* surface parameters
//   lsmc:      paths (1e5), exercise_per_year (10)
PricingResult mc_basket_put(const ProblemSpec& spec, const MarketParams& mkt,
                            const ExecConfig& exec = {});
PricingResult mc_localvol_call(const ProblemSpec& spec, const MarketParams& mkt,
                               const LocalVolSurface& surface, const ExecConfig& exec = {});
PricingResult lsmc_american_basket_put(const ProblemSpec& spec, const MarketParams& mkt,
                                       const ExecConfig& exec = {});

double local_vol(const LocalVolSurface& surface, double t, double spot);
void validate(const LocalVolSurface& surface);

/// Routes a problem to its engine using the market and surface stored in it.
PricingResult price(const ProblemSpec& spec, const ExecConfig& exec = {});

/// Plain Black-Scholes helpers shared by the engines.
double norm_cdf(double x);
double bs_call(double spot, double strike, double rate, double div, double sigma, double t);
double bs_put(double spot, double strike, double rate, double div, double sigma, double t);

}  // namespace riskbench
