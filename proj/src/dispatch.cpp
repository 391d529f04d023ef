#include "riskbench/dispatch.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "riskbench/codec.hpp"
#include "riskbench/pricing.hpp"

namespace riskbench::dispatch {
namespace {

using transport::Endpoint;
using transport::kAny;

constexpr std::string_view kNameBatchMagic = "RBT1";
constexpr std::string_view kBlobBatchMagic = "RBB1";
constexpr std::string_view kResultBatchMagic = "RBL1";
constexpr std::string_view kResultsFileMagic = "RBR1";
constexpr std::uint32_t kResultsFileVersion = 1;

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

Bytes pack_list(std::string_view magic, const std::vector<Bytes>& items) {
    ByteWriter w;
    w.magic(magic);
    w.u32(static_cast<std::uint32_t>(items.size()));
    for (const auto& item : items) w.blob(item);
    return w.take();
}

/// A single item travels bare; several travel in a container.
std::vector<Bytes> unpack_list(std::string_view magic, const Bytes& payload) {
    if (!starts_with(payload, magic)) return {payload};
    ByteReader r(payload);
    r.raw(magic.size());
    const auto n = r.u32();
    std::vector<Bytes> items;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = r.u32();
        const auto body = r.raw(len);
        items.emplace_back(body.begin(), body.end());
    }
    if (!r.done()) throw Error(ErrorCode::kProtocol, "trailing bytes in batch container");
    return items;
}

/// What the master sends for one job: its path, and the image unless shared-fs.
struct Payload {
    std::string name;
    Bytes blob;
};

Payload load_payload(const std::filesystem::path& path, Strategy strategy) {
    Payload p{std::filesystem::absolute(path).string(), {}};
    switch (strategy) {
        case Strategy::kFullLoad: p.blob = codec::encode(codec::load(path)).payload; break;
        case Strategy::kSerializedLoad: p.blob = codec::sload(path).payload; break;
        case Strategy::kSharedFs:
            if (!std::filesystem::is_regular_file(path)) {
                throw Error(ErrorCode::kIo, "missing job file " + path.string());
            }
            break;
    }
    return p;
}

void send_payloads(Endpoint& ep, std::uint32_t worker, const std::vector<Payload>& batch, Strategy strategy) {
    if (batch.size() == 1) {
        ep.send(worker, transport::kName, to_bytes(batch[0].name));
        if (strategy != Strategy::kSharedFs) ep.send(worker, transport::kBlob, batch[0].blob);
        return;
    }
    std::vector<Bytes> names, blobs;
    for (const auto& p : batch) {
        names.push_back(to_bytes(p.name));
        blobs.push_back(p.blob);
    }
    ep.send(worker, transport::kName, pack_list(kNameBatchMagic, names));
    if (strategy != Strategy::kSharedFs) ep.send(worker, transport::kBlob, pack_list(kBlobBatchMagic, blobs));
}

PricingResult error_result(std::string id, const Error& e) {
    PricingResult r;
    r.problem_id = std::move(id);
    r.status = e.code();
    r.message = e.what();
    return r;
}

std::string stem_of(const std::string& name) { return std::filesystem::path(name).stem().string(); }

}  // namespace

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kFullLoad: return "full";
        case Strategy::kSharedFs: return "nfs";
        case Strategy::kSerializedLoad: return "sload";
    }
    return "?";
}

std::string_view strategy_label(Strategy s) {
    switch (s) {
        case Strategy::kFullLoad: return "full load";
        case Strategy::kSharedFs: return "NFS";
        case Strategy::kSerializedLoad: return "serialized load";
    }
    return "?";
}

Strategy strategy_from_name(std::string_view name) {
    for (auto s : kAllStrategies) {
        if (strategy_name(s) == name) return s;
    }
    throw Error(ErrorCode::kConfig, "unknown strategy '" + std::string(name) + "' (full, nfs, sload)");
}

std::optional<Strategy> strategy_from_word(std::uint32_t word) {
    for (auto s : kAllStrategies) {
        if (static_cast<std::uint32_t>(s) == word) return s;
    }
    return std::nullopt;
}

DispatchAborted::DispatchAborted(std::uint32_t rank, std::vector<std::string> completed,
                                 std::vector<std::string> missing)
    : Error(ErrorCode::kDispatch, "worker " + std::to_string(rank) + " lost: " +
                                      std::to_string(completed.size()) + " jobs completed, " +
                                      std::to_string(missing.size()) + " missing"),
      rank_(rank),
      completed_(std::move(completed)),
      missing_(std::move(missing)) {}

PricingResult default_pricer(const ProblemSpec& spec) { return price(spec, ExecConfig{1}); }

void send_job(Endpoint& ep, const std::filesystem::path& path, std::uint32_t worker, Strategy strategy) {
    send_payloads(ep, worker, {load_payload(path, strategy)}, strategy);
}

ReceivedResult receive_result(Endpoint& ep) {
    const auto frame = ep.recv(kAny, transport::kResult);
    ReceivedResult out;
    out.worker = frame.source;
    for (const auto& item : unpack_list(kResultBatchMagic, frame.payload)) {
        out.results.push_back(codec::decode_result(item));
    }
    return out;
}

WorkerStats run_worker(Endpoint& ep, Strategy strategy, const Pricer& pricer) {
    WorkerStats stats;
    for (;;) {
        const auto name_frame = ep.recv(0, transport::kName);
        if (name_frame.payload.empty()) break;
        const auto names = unpack_list(kNameBatchMagic, name_frame.payload);
        std::vector<Bytes> blobs;
        if (strategy != Strategy::kSharedFs) blobs = unpack_list(kBlobBatchMagic, ep.recv(0, transport::kBlob).payload);

        std::vector<Bytes> results;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const std::string name(names[i].begin(), names[i].end());
            std::string id = stem_of(name);
            PricingResult r;
            try {
                if (strategy != Strategy::kSharedFs && blobs.size() != names.size()) {
                    throw Error(ErrorCode::kProtocol, "batch carries " + std::to_string(blobs.size()) +
                                                          " images for " + std::to_string(names.size()) + " names");
                }
                const ProblemSpec spec = strategy == Strategy::kSharedFs ? codec::load(name)
                                                                         : codec::decode(blobs[i]);
                id = spec.id;
                r = pricer(spec);
                r.problem_id = spec.id;
            } catch (const Error& e) {
                r = error_result(id, e);
            } catch (const std::exception& e) {
                r = error_result(id, Error(ErrorCode::kNumeric, e.what()));
            }
            if (!r.ok()) ++stats.failures;
            ++stats.jobs;
            results.push_back(codec::encode_result(r));
        }
        ep.send(0, transport::kResult, results.size() == 1 ? results[0] : pack_list(kResultBatchMagic, results));
    }
    return stats;
}

RunReport run_master(const std::vector<std::filesystem::path>& jobs, const MasterOptions& opts, Endpoint& ep) {
    if (ep.size() < 2) throw Error(ErrorCode::kConfig, "run_master needs at least one worker");
    if (jobs.empty()) throw Error(ErrorCode::kConfig, "run_master needs at least one job");
    if (opts.batch < 1) throw Error(ErrorCode::kConfig, "batch size must be >= 1");
    const std::uint32_t workers = ep.size() - 1;

    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    auto now = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };
    const auto frames0 = ep.traffic().frames.load();
    const auto bytes0 = ep.traffic().payload_bytes.load();

    std::deque<std::size_t> pending;
    for (std::size_t i = 0; i < jobs.size(); ++i) pending.push_back(i);

    struct Assignment {
        std::vector<std::size_t> jobs;
        double assigned;
    };
    std::map<std::uint32_t, Assignment> outstanding;
    std::vector<bool> alive(workers + 1, true);
    std::vector<bool> done(jobs.size(), false);
    RunReport report;
    std::optional<double> first_send;
    double last_result = 0.0;

    auto fail_on_master = [&](std::size_t job, const Error& e) {
        JobOutcome o;
        o.job = jobs[job];
        o.problem_id = jobs[job].stem().string();
        o.result = error_result(o.problem_id, e);
        o.assign = o.complete = now();
        report.outcomes.push_back(std::move(o));
        done[job] = true;
    };

    auto abort_run = [&](std::uint32_t rank) {
        for (std::uint32_t r = 1; r <= workers; ++r) {
            if (!alive[r]) continue;
            try {
                ep.send(r, transport::kName, {});
            } catch (const Error&) {
            }
        }
        std::vector<std::string> completed, missing;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            (done[i] ? completed : missing).push_back(jobs[i].stem().string());
        }
        throw DispatchAborted(rank, std::move(completed), std::move(missing));
    };

    auto lose = [&](std::uint32_t rank) {
        alive[rank] = false;
        report.lost_workers.push_back(rank);
        if (auto it = outstanding.find(rank); it != outstanding.end()) {
            for (auto j = it->second.jobs.rbegin(); j != it->second.jobs.rend(); ++j) pending.push_front(*j);
            outstanding.erase(it);
        }
        if (!opts.reassign_on_failure || std::none_of(alive.begin() + 1, alive.end(), [](bool a) { return a; })) {
            abort_run(rank);
        }
    };

    // Hands the next batch to `rank`; false when nothing is left.
    auto assign = [&](std::uint32_t rank) -> bool {
        while (!pending.empty()) {
            std::vector<std::size_t> batch;
            std::vector<Payload> payloads;
            while (!pending.empty() && batch.size() < opts.batch) {
                const auto job = pending.front();
                pending.pop_front();
                try {
                    payloads.push_back(load_payload(jobs[job], opts.strategy));
                    batch.push_back(job);
                } catch (const Error& e) {
                    fail_on_master(job, e);
                }
            }
            if (batch.empty()) continue;
            const double t = now();
            if (!first_send) first_send = t;
            try {
                send_payloads(ep, rank, payloads, opts.strategy);
            } catch (const PeerLost&) {
                for (auto j = batch.rbegin(); j != batch.rend(); ++j) pending.push_front(*j);
                lose(rank);
                return false;
            }
            outstanding[rank] = {std::move(batch), t};
            return true;
        }
        return false;
    };

    // Phase 1: one assignment per worker.
    for (std::uint32_t r = 1; r <= workers && !pending.empty(); ++r) assign(r);

    // Phases 2 and 3: record each result and reassign the freed worker.
    while (!outstanding.empty()) {
        ReceivedResult got;
        try {
            got = receive_result(ep);
        } catch (const PeerLost& e) {
            lose(e.rank());
            // Requeued jobs go to idle survivors.
            for (std::uint32_t r = 1; r <= workers && !pending.empty(); ++r) {
                if (alive[r] && !outstanding.count(r)) assign(r);
            }
            continue;
        }
        const double t = now();
        last_result = t;
        const auto it = outstanding.find(got.worker);
        if (it == outstanding.end() || it->second.jobs.size() != got.results.size()) {
            throw Error(ErrorCode::kProtocol, "unexpected result from rank " + std::to_string(got.worker));
        }
        for (std::size_t i = 0; i < got.results.size(); ++i) {
            const auto job = it->second.jobs[i];
            JobOutcome o;
            o.job = jobs[job];
            o.problem_id = got.results[i].problem_id;
            o.worker_rank = got.worker;
            o.result = std::move(got.results[i]);
            o.assign = it->second.assigned;
            o.complete = t;
            report.outcomes.push_back(std::move(o));
            done[job] = true;
        }
        outstanding.erase(it);
        assign(got.worker);
    }

    // Phase 4: stop every worker.
    for (std::uint32_t r = 1; r <= workers; ++r) {
        if (!alive[r]) continue;
        try {
            ep.send(r, transport::kName, {});
        } catch (const PeerLost&) {
        }
    }

    report.wall_time = first_send ? last_result - *first_send : 0.0;
    report.frames_sent = ep.traffic().frames - frames0;
    report.bytes_sent = ep.traffic().payload_bytes - bytes0;
    if (opts.results_file) write_results(*opts.results_file, report.outcomes);
    return report;
}

void write_results(const std::filesystem::path& path, const std::vector<JobOutcome>& outcomes) {
    ByteWriter w;
    w.magic(kResultsFileMagic);
    w.u32(kResultsFileVersion);
    w.u32(static_cast<std::uint32_t>(outcomes.size()));
    for (const auto& o : outcomes) {
        w.str(o.problem_id);
        w.str(o.job.string());
        w.u32(o.worker_rank);
        w.f64(o.enqueue);
        w.f64(o.assign);
        w.f64(o.complete);
        w.blob(codec::encode_result(o.result));
    }
    codec::write_file(path, w.bytes());
}

std::vector<JobOutcome> read_results(const std::filesystem::path& path) {
    const auto bytes = codec::read_file(path);
    ByteReader r(bytes);
    if (!r.at_magic(kResultsFileMagic)) throw Error(ErrorCode::kBadMagic, "not a results file: " + path.string());
    r.raw(kResultsFileMagic.size());
    if (const auto v = r.u32(); v != kResultsFileVersion) {
        throw Error(ErrorCode::kVersionMismatch, "results file version " + std::to_string(v));
    }
    const auto count = r.u32();
    if (count > r.remaining()) throw Error(ErrorCode::kTruncated, "results file shorter than its count");
    std::vector<JobOutcome> out(count);
    for (auto& o : out) {
        o.problem_id = r.str();
        o.job = r.str();
        o.worker_rank = r.u32();
        o.enqueue = r.f64();
        o.assign = r.f64();
        o.complete = r.f64();
        const auto len = r.u32();
        o.result = codec::decode_result(r.raw(len));
    }
    if (!r.done()) throw Error(ErrorCode::kInvariant, "trailing bytes in results file");
    return out;
}

}  // namespace riskbench::dispatch
