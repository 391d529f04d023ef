// riskbench: generate, inspect and price problem files, run the master/worker
// farm, and sweep it for speedup reports.
//
// Exit codes: 0 ok, 2 usage or configuration, 3 I/O or bad file contents,
// 4 transport or dispatch, 5 numeric.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>

#include "riskbench/bench.hpp"
#include "riskbench/codec.hpp"
#include "riskbench/dispatch.hpp"
#include "riskbench/portfolio.hpp"
#include "riskbench/pricing.hpp"

namespace fs = std::filesystem;
using namespace riskbench;

namespace {

enum class Level { kError, kWarn, kInfo, kDebug };
Level g_level = Level::kInfo;

template <typename... Args>
void log(Level level, const Args&... parts) {
    if (level > g_level) return;
    static const char* const kTags[] = {"error", "warn", "info", "debug"};
    std::cerr << "riskbench: " << kTags[static_cast<int>(level)] << ": ";
    (std::cerr << ... << parts) << '\n';
}

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::kOk: return 0;
        case ErrorCode::kConfig:
        case ErrorCode::kInvariant:
        case ErrorCode::kDimension:
        case ErrorCode::kState: return 2;
        case ErrorCode::kIo:
        case ErrorCode::kBadMagic:
        case ErrorCode::kTruncated:
        case ErrorCode::kVersionMismatch: return 3;
        case ErrorCode::kTransport:
        case ErrorCode::kPeerLost:
        case ErrorCode::kProtocol:
        case ErrorCode::kDispatch: return 4;
        case ErrorCode::kNumeric: return 5;
    }
    return 1;
}

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

std::chrono::milliseconds seconds(double s) {
    return std::chrono::milliseconds(static_cast<long long>(s * 1000.0));
}

dispatch::Pricer threaded_pricer(int threads) {
    return [threads](const ProblemSpec& spec) { return price(spec, ExecConfig{threads}); };
}

std::vector<fs::path> jobs_in(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
    auto jobs = list_jobs(dir);
    if (jobs.empty()) throw Error(ErrorCode::kConfig, "no .rbp or .rbz files in " + dir.string());
    return jobs;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---- generate

struct GenerateArgs {
    std::string out;
    std::optional<std::size_t> target;
    double mc_scale = 1.0;
    std::vector<std::string> kinds;
    std::optional<std::uint64_t> seed;
    std::optional<double> spot, rate, sigma, barrier_fraction, rho;
    bool compress = false;
};

int cmd_generate(const GenerateArgs& a) {
    PortfolioConfig cfg;
    cfg.output_dir = a.out;
    cfg.target_total = a.target;
    cfg.mc_scale = a.mc_scale;
    cfg.compress = a.compress;
    if (a.seed) cfg.seed0 = *a.seed;
    if (a.spot) cfg.spot0 = *a.spot;
    if (a.rate) cfg.rate = *a.rate;
    if (a.sigma) cfg.sigma = *a.sigma;
    if (a.barrier_fraction) cfg.barrier_fraction = *a.barrier_fraction;
    if (a.rho) cfg.correlation_rho = *a.rho;
    for (const auto& name : a.kinds) {
        const auto k = kind_from_name(name);
        if (!k) throw Error(ErrorCode::kConfig, "unknown problem kind: " + name);
        cfg.kinds.push_back(*k);
    }
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + a.out + ": " + ec.message());

    const auto t0 = std::chrono::steady_clock::now();
    const auto specs = generate_portfolio(cfg);
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::map<std::string_view, std::size_t> counts;
    for (const auto& s : specs) ++counts[kind_name(s.kind)];
    for (auto k : kAllKinds) {
        if (auto it = counts.find(kind_name(k)); it != counts.end()) std::cout << it->first << ' ' << it->second << '\n';
    }
    std::cout << "total " << specs.size() << '\n';
    log(Level::kInfo, "wrote ", specs.size(), " problems to ", a.out, " in ", fmt(took), " s");
    return 0;
}

// ---- inspect

void print_spec(const ProblemSpec& s) {
    std::cout << "id: " << s.id << "\nkind: " << kind_name(s.kind) << " (" << static_cast<unsigned>(s.kind)
              << ")\nstrike: " << fmt(s.strike) << "\nmaturity: " << fmt(s.maturity) << '\n';
    if (s.barrier) std::cout << "barrier: " << fmt(*s.barrier) << '\n';
    std::cout << "dimension: " << s.dimension << "\nspot: " << fmt(s.model.spot) << "\nrate: " << fmt(s.model.rate)
              << "\nsigma: " << fmt(s.model.sigma) << "\ncorrelation_rho: " << fmt(s.model.correlation_rho)
              << "\ndividend_yield: " << fmt(s.model.dividend_yield) << "\nseed: " << s.seed << '\n';
    for (const auto& [k, v] : s.method_params) {
        std::cout << "param " << k << ':';
        for (double x : v) std::cout << ' ' << fmt(x);
        std::cout << '\n';
    }
}

void print_result(const PricingResult& r) {
    std::cout << r.problem_id << ' ';
    if (!r.ok()) {
        std::cout << "error " << to_string(r.status) << ": " << r.message << '\n';
        return;
    }
    std::cout << "price " << fmt(r.price);
    if (r.std_error) std::cout << " stderr " << fmt(*r.std_error);
    if (r.delta) std::cout << " delta " << fmt(*r.delta);
    if (r.degraded_dates) std::cout << " degraded_dates " << r.degraded_dates;
    std::cout << " time " << fmt(r.wall_time) << '\n';
}

int cmd_inspect(const std::vector<std::string>& files) {
    for (const auto& f : files) {
        const auto bytes = codec::read_file(f);
        if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "RBR1") {
            for (const auto& o : dispatch::read_results(f)) {
                std::cout << "worker " << o.worker_rank << ' ';
                print_result(o.result);
            }
            continue;
        }
        const auto blob = codec::blob_from_bytes(bytes);
        if (blob.compressed) {
            std::cout << "container: RBZ1, " << bytes.size() << " bytes\n";
        } else {
            std::cout << "container: RBP1, " << bytes.size() << " bytes\n";
        }
        print_spec(codec::decode(blob));
        if (files.size() > 1) std::cout << '\n';
    }
    return 0;
}

// ---- price

int cmd_price(const std::vector<std::string>& files, int threads) {
    int rc = 0;
    for (const auto& f : files) {
        try {
            print_result(price(codec::load(f), ExecConfig{threads}));
        } catch (const Error& e) {
            log(Level::kError, f, ": ", e.what());
            if (rc == 0) rc = exit_code(e.code());
        }
    }
    return rc;
}

// ---- master / worker

struct MasterArgs {
    std::string jobs;
    std::string strategy = "sload";
    std::size_t workers = 1;
    std::size_t batch = 1;
    bool reassign = false;
    std::string listen;
    double timeout = 60.0;
    std::string results = "pb-res.rbr";
};

int cmd_master(const MasterArgs& a) {
    dispatch::MasterOptions opts;
    opts.strategy = dispatch::strategy_from_name(a.strategy);
    opts.batch = a.batch;
    opts.reassign_on_failure = a.reassign;
    if (!a.results.empty()) opts.results_file = fs::path(a.results);
    const auto jobs = jobs_in(a.jobs);
    const std::string addr = a.listen.empty() ? env_or(transport::kMasterAddrEnv, "127.0.0.1:47100") : a.listen;

    transport::Listener listener(addr);
    log(Level::kInfo, "listening on port ", listener.port(), ", waiting for ", a.workers, " workers");
    auto ep = listener.accept(a.workers, seconds(a.timeout), static_cast<std::uint32_t>(opts.strategy));
    log(Level::kInfo, "dispatching ", jobs.size(), " jobs (", dispatch::strategy_label(opts.strategy), ")");
    const auto report = dispatch::run_master(jobs, opts, *ep);
    ep->close();

    std::size_t failed = 0;
    ErrorCode first = ErrorCode::kOk;
    for (const auto& o : report.outcomes) {
        if (o.result.ok()) continue;
        ++failed;
        if (first == ErrorCode::kOk) first = o.result.status;
        log(Level::kWarn, o.problem_id, ": ", to_string(o.result.status), ": ", o.result.message);
    }
    std::cout << "jobs " << report.outcomes.size() << "\nfailed " << failed << "\nwall_time " << fmt(report.wall_time)
              << "\nbytes_sent " << report.bytes_sent << '\n';
    if (!report.lost_workers.empty()) log(Level::kWarn, report.lost_workers.size(), " workers lost");
    return exit_code(first);
}

struct WorkerArgs {
    std::string connect;
    std::string strategy;
    double timeout = 60.0;
    int threads = 1;
};

int cmd_worker(const WorkerArgs& a) {
    const std::string addr = a.connect.empty() ? env_or(transport::kMasterAddrEnv, "") : a.connect;
    if (addr.empty()) {
        throw Error(ErrorCode::kConfig, std::string("no master address: use --connect or ") + transport::kMasterAddrEnv);
    }
    auto ep = transport::connect(addr, seconds(a.timeout));
    const auto announced = dispatch::strategy_from_word(ep->app_word());
    dispatch::Strategy strategy;
    if (!a.strategy.empty()) {
        strategy = dispatch::strategy_from_name(a.strategy);
        if (announced && *announced != strategy) {
            throw Error(ErrorCode::kConfig, "master runs " + std::string(dispatch::strategy_name(*announced)) +
                                                ", worker asked for " + a.strategy);
        }
    } else if (announced) {
        strategy = *announced;
    } else {
        throw Error(ErrorCode::kConfig, "master did not announce a strategy; pass --strategy");
    }
    log(Level::kDebug, "rank ", ep->rank(), " of ", ep->size(), ", ", dispatch::strategy_label(strategy));
    const auto stats = dispatch::run_worker(*ep, strategy, threaded_pricer(a.threads));
    ep->close();
    log(Level::kDebug, "rank done: ", stats.jobs, " jobs, ", stats.failures, " failures");
    return 0;
}

// ---- bench / report

struct BenchArgs {
    std::string jobs;
    std::vector<std::string> strategies{"full", "nfs", "sload"};
    std::vector<std::size_t> workers{1, 2, 4, 8};
    std::size_t repeat = 3;
    std::size_t batch = 1;
    std::string out = "report";
    int threads = 1;
};

int cmd_bench(const BenchArgs& a) {
    bench::SweepOptions opts;
    opts.strategies.clear();
    for (const auto& s : a.strategies) opts.strategies.push_back(dispatch::strategy_from_name(s));
    opts.worker_counts = a.workers;
    opts.repeats = a.repeat;
    opts.batch = a.batch;
    opts.on_record = [](const bench::BenchRecord& r) {
        if (r.failed) {
            log(Level::kWarn, r.run_id, " failed: ", r.error);
        } else {
            log(Level::kInfo, r.run_id, ": ", fmt(r.wall_time), " s", r.warm_cache ? " (warm)" : "");
        }
    };
    const auto jobs = jobs_in(a.jobs);
    const fs::path self = fs::read_symlink("/proc/self/exe");
    std::vector<std::string> extra{"--threads", std::to_string(a.threads)};
    if (g_level < Level::kDebug) extra.insert(extra.end(), {"--log-level", "warn"});
    const auto records = bench::run_sweep(jobs, opts, bench::process_launcher(self, extra));
    bench::emit_report(records, a.out);
    std::cout << bench::to_markdown(records);
    const auto failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.failed; });
    if (failed > 0) {
        log(Level::kError, failed, " of ", records.size(), " runs failed");
        return exit_code(ErrorCode::kDispatch);
    }
    return 0;
}

int cmd_report(const std::string& runs, const std::string& out) {
    const auto bytes = codec::read_file(runs);
    const auto records = bench::parse_runs_csv(std::string(bytes.begin(), bytes.end()));
    if (!out.empty()) bench::emit_report(records, out);
    std::cout << bench::to_markdown(records);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Portfolio pricing on a master/worker farm"};
    app.name("riskbench");
    app.require_subcommand(1);
    app.fallthrough();
    std::string level = "info";
    app.add_option("--log-level", level, "error, warn, info or debug")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write the benchmark portfolio as problem files");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--target", gen.target, "Keep about this many problems, spread over the tranches")
        ->check(CLI::PositiveNumber);
    g->add_option("--mc-scale", gen.mc_scale, "Multiplier on Monte Carlo path counts")->check(CLI::PositiveNumber);
    g->add_option("--kinds", gen.kinds, "Only these problem kinds, e.g. VanillaCall,VanillaPut")->delimiter(',');
    g->add_option("--seed", gen.seed, "Base seed");
    g->add_option("--spot", gen.spot, "Initial spot");
    g->add_option("--rate", gen.rate, "Risk-free rate");
    g->add_option("--sigma", gen.sigma, "Volatility");
    g->add_option("--barrier-fraction", gen.barrier_fraction, "Barrier as a fraction of spot");
    g->add_option("--rho", gen.rho, "Basket equicorrelation");
    g->add_flag("--compress", gen.compress, "Write compressed .rbz files");

    std::vector<std::string> inspect_files;
    auto* ins = app.add_subcommand("inspect", "Print the decoded fields of problem or results files");
    ins->add_option("files", inspect_files)->required()->check(CLI::ExistingFile);

    std::vector<std::string> price_files;
    int price_threads = 1;
    auto* pr = app.add_subcommand("price", "Price problem files locally");
    pr->add_option("files", price_files)->required()->check(CLI::ExistingFile);
    pr->add_option("--threads", price_threads, "OpenMP threads for Monte Carlo kernels")->check(CLI::Range(1, 1024));

    MasterArgs ma;
    auto* m = app.add_subcommand("master", "Dispatch a job directory to connected workers");
    m->add_option("--jobs", ma.jobs, "Directory of problem files")->required();
    m->add_option("--strategy", ma.strategy, "full, nfs or sload")->check(CLI::IsMember({"full", "nfs", "sload"}));
    m->add_option("--workers", ma.workers, "Number of workers to wait for")->required()->check(CLI::PositiveNumber);
    m->add_option("--batch", ma.batch, "Jobs per message")->check(CLI::PositiveNumber);
    m->add_flag("--reassign-on-failure", ma.reassign, "Requeue the jobs of a lost worker instead of aborting");
    m->add_option("--listen", ma.listen, std::string("host:port; default $") + transport::kMasterAddrEnv);
    m->add_option("--timeout", ma.timeout, "Seconds to wait for workers")->check(CLI::PositiveNumber);
    m->add_option("--results", ma.results, "Results file; empty to skip");

    WorkerArgs wa;
    auto* w = app.add_subcommand("worker", "Connect to a master and price jobs until told to stop");
    w->add_option("--connect", wa.connect, std::string("host:port; default $") + transport::kMasterAddrEnv);
    w->add_option("--strategy", wa.strategy, "full, nfs or sload; default: announced by the master")
        ->check(CLI::IsMember({"full", "nfs", "sload"}));
    w->add_option("--timeout", wa.timeout, "Seconds to keep retrying the connection")->check(CLI::PositiveNumber);
    w->add_option("--threads", wa.threads, "OpenMP threads for Monte Carlo kernels")->check(CLI::Range(1, 1024));

    BenchArgs ba;
    auto* b = app.add_subcommand("bench", "Sweep strategies and worker counts with local worker processes");
    b->add_option("--jobs", ba.jobs, "Directory of problem files")->required();
    b->add_option("--strategies", ba.strategies, "Comma-separated subset of full,nfs,sload")
        ->delimiter(',')
        ->check(CLI::IsMember({"full", "nfs", "sload"}));
    b->add_option("--workers", ba.workers, "Comma-separated worker counts")->delimiter(',')->check(CLI::PositiveNumber);
    b->add_option("--repeat", ba.repeat, "Runs per configuration; the minimum is reported")
        ->check(CLI::PositiveNumber);
    b->add_option("--batch", ba.batch, "Jobs per message")->check(CLI::PositiveNumber);
    b->add_option("--out", ba.out, "Report directory");
    b->add_option("--threads", ba.threads, "OpenMP threads per worker")->check(CLI::Range(1, 1024));

    std::string runs_file, report_out;
    auto* rep = app.add_subcommand("report", "Rebuild the report tables from a runs.csv");
    rep->add_option("runs", runs_file, "runs.csv from a bench sweep")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", report_out, "Also write bench.csv, runs.csv and bench.md here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    g_level = level == "error" ? Level::kError : level == "warn" ? Level::kWarn : level == "debug" ? Level::kDebug
                                                                                                    : Level::kInfo;
    try {
        if (*g) return cmd_generate(gen);
        if (*ins) return cmd_inspect(inspect_files);
        if (*pr) return cmd_price(price_files, price_threads);
        if (*m) return cmd_master(ma);
        if (*w) return cmd_worker(wa);
        if (*b) return cmd_bench(ba);
        if (*rep) return cmd_report(runs_file, report_out);
    } catch (const Error& e) {
        log(Level::kError, e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        log(Level::kError, e.what());
        return 1;
    }
    return 2;
}
