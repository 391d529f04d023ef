#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "riskbench/types.hpp"

namespace riskbench {

struct PortfolioConfig {
    double spot0 = 100.0;
    double rate = 0.05;
    double sigma = 0.2;
    double barrier_fraction = 0.8;
    double correlation_rho = 0.3;
    std::filesystem::path output_dir;  // empty: do not write files
    std::uint64_t seed0 = 20091231;

    // Scaled-down variants (defaults reproduce the full portfolio).
    /// Multiplies Monte Carlo sample/path counts.
    double mc_scale = 1.0;
    /// When set, keeps about this many problems, spread evenly over each tranche.
    std::optional<std::size_t> target_total;
    /// When non-empty, only these tranches are generated.
    std::vector<ProblemKind> kinds;
    bool compress = false;
};

struct Tranche {
    ProblemKind kind;
    std::vector<double> maturities;        // years
    std::vector<double> strike_fractions;  // of spot
    std::uint32_t dimension;
    std::size_t expected_count;
};

/// Grid of one portfolio tranche. Throws kConfig for kinds not in the portfolio.
Tranche tranche_grids(ProblemKind kind);

/// The six portfolio tranches in generation order.
std::vector<Tranche> portfolio_tranches();

inline constexpr std::size_t kPortfolioSize = 7931;

/// Builds the portfolio; writes `<kind>_<index>.rbp` per problem when
/// cfg.output_dir is set. I/O failure throws kIo naming how many files were written.
std::vector<ProblemSpec> generate_portfolio(const PortfolioConfig& cfg);

/// Problem files of a directory in stable (kind, index) order.
std::vector<std::filesystem::path> list_jobs(const std::filesystem::path& dir);

/// Orders ids of the form <kind>_<index> by kind name, then numeric index.
bool job_id_less(std::string_view a, std::string_view b);

}  // namespace riskbench
