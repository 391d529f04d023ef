#pragma once

// Master/worker portfolio pricer.
//
// The master seeds every worker with one job, then hands the next pending job
// to whichever worker returns a result, and finally sends each worker an empty
// NAME frame. A job travels as a NAME frame (the file path) optionally
// followed by a BLOB frame (the problem image), depending on the strategy.
//
// Batched assignments (batch > 1) use containers:
//   NAME   "RBT1", u32 count, count x (u32 length + path)
//   BLOB   "RBB1", u32 count, count x (u32 length + image)
//   RESULT "RBL1", u32 count, count x (u32 length + result record)
// Results file (pb-res.rbr): "RBR1", u32 version, u32 count, then per outcome
//   problem id, job path (strings), u32 worker rank, f64 enqueue, f64 assign,
//   f64 complete, u32 length + result record.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskbench/transport.hpp"
#include "riskbench/types.hpp"

namespace riskbench::dispatch {

enum class Strategy : std::uint32_t { kFullLoad = 1, kSharedFs = 2, kSerializedLoad = 3 };

inline constexpr Strategy kAllStrategies[] = {Strategy::kFullLoad, Strategy::kSharedFs,
                                              Strategy::kSerializedLoad};

/// CLI names: full, nfs, sload.
std::string_view strategy_name(Strategy s);
/// Report labels: full load, NFS, serialized load.
std::string_view strategy_label(Strategy s);
/// Errors: kConfig.
Strategy strategy_from_name(std::string_view name);
std::optional<Strategy> strategy_from_word(std::uint32_t word);

struct JobOutcome {
    std::string problem_id;
    std::filesystem::path job;
    std::uint32_t worker_rank = 0;  // 0: failed on the master, never sent
    PricingResult result;
    // Seconds since the run started.
    double enqueue = 0.0;
    double assign = 0.0;
    double complete = 0.0;

    bool operator==(const JobOutcome&) const = default;
};

struct MasterOptions {
    Strategy strategy = Strategy::kSerializedLoad;
    std::size_t batch = 1;
    /// Requeue the jobs of a lost worker instead of aborting.
    bool reassign_on_failure = false;
    std::optional<std::filesystem::path> results_file;
};

struct RunReport {
    std::vector<JobOutcome> outcomes;  // completion order
    double wall_time = 0.0;            // first send to last result, seconds
    std::uint64_t bytes_sent = 0;      // master payload bytes, sentinels excluded
    std::uint64_t frames_sent = 0;
    std::vector<std::uint32_t> lost_workers;
};

/// Raised when a worker is lost and reassignment is off.
class DispatchAborted : public Error {
public:
    DispatchAborted(std::uint32_t rank, std::vector<std::string> completed, std::vector<std::string> missing);
    std::uint32_t rank() const noexcept { return rank_; }
    const std::vector<std::string>& completed() const noexcept { return completed_; }
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::uint32_t rank_;
    std::vector<std::string> completed_, missing_;
};

/// Errors: kConfig without workers or jobs; DispatchAborted; kProtocol on
/// malformed results; transport errors.
RunReport run_master(const std::vector<std::filesystem::path>& jobs, const MasterOptions& opts,
                     transport::Endpoint& ep);

using Pricer = std::function<PricingResult(const ProblemSpec&)>;

/// Single-threaded pricing through the engine router.
PricingResult default_pricer(const ProblemSpec& spec);

struct WorkerStats {
    std::size_t jobs = 0;
    std::size_t failures = 0;
};

/// Serves jobs until the empty-name sentinel. Load or pricing failures are
/// answered with an error result, not raised.
WorkerStats run_worker(transport::Endpoint& ep, Strategy strategy, const Pricer& pricer = default_pricer);

/// Sends one job per the strategy. Errors: kIo for a missing file; codec
/// errors when full load cannot decode it.
void send_job(transport::Endpoint& ep, const std::filesystem::path& path, std::uint32_t worker,
              Strategy strategy);

struct ReceivedResult {
    std::uint32_t worker = 0;
    std::vector<PricingResult> results;  // one per job of the assignment
};

/// Earliest completed assignment from any worker.
ReceivedResult receive_result(transport::Endpoint& ep);

void write_results(const std::filesystem::path& path, const std::vector<JobOutcome>& outcomes);
std::vector<JobOutcome> read_results(const std::filesystem::path& path);

}  // namespace riskbench::dispatch
