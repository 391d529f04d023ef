#pragma once

// Timing sweeps over strategies and worker counts, speedup ratios and reports.
//
// Speedup ratio of a run with n CPUs against the base run (smallest n), where
// one CPU is the master and the others are workers:
//   ratio = T_base * (n_base - 1) / ((n - 1) * T_n)

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "riskbench/dispatch.hpp"

namespace riskbench::bench {

struct BenchRecord {
    std::uint32_t n_cpus = 0;  // master + workers
    dispatch::Strategy strategy = dispatch::Strategy::kSerializedLoad;
    double wall_time = 0.0;    // seconds, first send to last result
    std::size_t job_count = 0;
    std::string run_id;
    std::string job_set;       // fingerprint of the job list
    std::size_t repeat = 0;
    bool warm_cache = false;   // job files already read earlier in this sweep
    bool failed = false;
    std::string error;

    bool operator==(const BenchRecord&) const = default;
};

/// Errors: kConfig when strategies or job sets differ or a record is unusable.
double speedup_ratio(const BenchRecord& base, const BenchRecord& r);

struct SpeedupRow {
    std::uint32_t n_cpus = 0;
    double time = 0.0;
    double ratio = 0.0;

    bool operator==(const SpeedupRow&) const = default;
};

struct SpeedupTable {
    BenchRecord base;
    std::vector<SpeedupRow> rows;  // ascending n_cpus, base first with ratio 1
};

/// Per (strategy, n_cpus) over successful repeats.
struct Summary {
    dispatch::Strategy strategy;
    std::uint32_t n_cpus;
    std::size_t runs = 0, failures = 0;
    double min = 0.0, mean = 0.0, max = 0.0;
};

std::vector<Summary> summarize(const std::vector<BenchRecord>& records);

/// Speedup table for one strategy from the fastest successful repeat at each
/// CPU count. Errors: kConfig if the strategy has no successful record.
SpeedupTable speedup_table(const std::vector<BenchRecord>& records, dispatch::Strategy strategy);

/// Fingerprint of a job list (file names and sizes).
std::string job_set_id(const std::vector<std::filesystem::path>& jobs);

/// Runs the jobs once with a fresh set of `workers` workers.
using Launcher = std::function<dispatch::RunReport(const std::vector<std::filesystem::path>& jobs,
                                                   const dispatch::MasterOptions& opts, std::size_t workers)>;

struct SweepOptions {
    std::vector<dispatch::Strategy> strategies{std::begin(dispatch::kAllStrategies),
                                               std::end(dispatch::kAllStrategies)};
    std::vector<std::size_t> worker_counts{1, 2, 4, 8};
    std::size_t repeats = 3;
    std::size_t batch = 1;
    /// Called after every run, e.g. for progress logging.
    std::function<void(const BenchRecord&)> on_record;
};

/// One record per (strategy, worker count, repeat), failed runs included.
std::vector<BenchRecord> run_sweep(const std::vector<std::filesystem::path>& jobs, const SweepOptions& opts,
                                   const Launcher& launch);

/// Workers as threads on the in-process backend.
Launcher thread_launcher(dispatch::Pricer pricer = dispatch::default_pricer);

/// Workers as `<executable> worker --connect 127.0.0.1:<port>` processes over
/// TCP loopback; startup is excluded from the timing.
Launcher process_launcher(std::filesystem::path executable, std::vector<std::string> extra_worker_args = {});

/// CSV with columns n_cpus,strategy,time_s,ratio; one row per (strategy, n_cpus).
std::string to_csv(const std::vector<BenchRecord>& records);
struct CsvRow {
    std::uint32_t n_cpus;
    dispatch::Strategy strategy;
    double time_s;
    double ratio;

    bool operator==(const CsvRow&) const = default;
};
std::vector<CsvRow> csv_rows(const std::vector<BenchRecord>& records);
/// Errors: kConfig on malformed input.
std::vector<CsvRow> parse_csv(const std::string& text);

/// Every repeat, failures included.
std::string runs_csv(const std::vector<BenchRecord>& records);
/// Inverse of runs_csv; records share one job-set label. Errors: kConfig.
std::vector<BenchRecord> parse_runs_csv(const std::string& text);

/// Table with paired Time / Speedup ratio columns: full load, NFS, serialized load.
std::string to_markdown(const std::vector<BenchRecord>& records);

/// Writes bench.csv, runs.csv and bench.md into `dir`. Errors: kConfig with no records.
void emit_report(const std::vector<BenchRecord>& records, const std::filesystem::path& dir);

}  // namespace riskbench::bench
