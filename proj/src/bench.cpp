#include "riskbench/bench.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>

#include "riskbench/codec.hpp"
#include "riskbench/rng.hpp"

extern char** environ;

namespace riskbench::bench {
namespace {

using dispatch::Strategy;

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::size_t strategy_order(Strategy s) {
    for (std::size_t i = 0; i < std::size(dispatch::kAllStrategies); ++i) {
        if (dispatch::kAllStrategies[i] == s) return i;
    }
    return std::size(dispatch::kAllStrategies);
}

/// Fastest successful record per CPU count for one strategy.
std::map<std::uint32_t, const BenchRecord*> best_runs(const std::vector<BenchRecord>& records, Strategy s) {
    std::map<std::uint32_t, const BenchRecord*> best;
    for (const auto& r : records) {
        if (r.failed || r.strategy != s) continue;
        auto& slot = best[r.n_cpus];
        if (!slot || r.wall_time < slot->wall_time) slot = &r;
    }
    return best;
}

}  // namespace

double speedup_ratio(const BenchRecord& base, const BenchRecord& r) {
    if (base.strategy != r.strategy) throw Error(ErrorCode::kConfig, "speedup ratio across different strategies");
    if (base.job_set != r.job_set || base.job_count != r.job_count) {
        throw Error(ErrorCode::kConfig, "speedup ratio across different job sets");
    }
    if (base.failed || r.failed) throw Error(ErrorCode::kConfig, "speedup ratio of a failed run");
    if (base.n_cpus < 2 || r.n_cpus < 2) throw Error(ErrorCode::kConfig, "a run needs a master and a worker");
    if (!(base.wall_time > 0.0) || !(r.wall_time > 0.0)) throw Error(ErrorCode::kConfig, "non-positive wall time");
    return base.wall_time * (base.n_cpus - 1.0) / ((r.n_cpus - 1.0) * r.wall_time);
}

std::vector<Summary> summarize(const std::vector<BenchRecord>& records) {
    std::map<std::pair<std::size_t, std::uint32_t>, Summary> groups;
    for (const auto& r : records) {
        auto [it, fresh] = groups.try_emplace({strategy_order(r.strategy), r.n_cpus}, Summary{r.strategy, r.n_cpus});
        Summary& s = it->second;
        if (r.failed) {
            ++s.failures;
            continue;
        }
        s.min = s.runs == 0 ? r.wall_time : std::min(s.min, r.wall_time);
        s.max = s.runs == 0 ? r.wall_time : std::max(s.max, r.wall_time);
        s.mean += r.wall_time;
        ++s.runs;
    }
    std::vector<Summary> out;
    for (auto& [key, s] : groups) {
        if (s.runs > 0) s.mean /= static_cast<double>(s.runs);
        out.push_back(s);
    }
    return out;
}

SpeedupTable speedup_table(const std::vector<BenchRecord>& records, Strategy strategy) {
    const auto best = best_runs(records, strategy);
    if (best.empty()) {
        throw Error(ErrorCode::kConfig, "no successful runs for " + std::string(dispatch::strategy_label(strategy)));
    }
    SpeedupTable table;
    table.base = *best.begin()->second;
    for (const auto& [n, rec] : best) table.rows.push_back({n, rec->wall_time, speedup_ratio(table.base, *rec)});
    return table;
}

std::string job_set_id(const std::vector<std::filesystem::path>& jobs) {
    std::vector<std::string> keys;
    for (const auto& j : jobs) {
        std::error_code ec;
        const auto size = std::filesystem::file_size(j, ec);
        keys.push_back(j.filename().string() + ":" + std::to_string(ec ? 0 : size));
    }
    std::sort(keys.begin(), keys.end());
    std::uint64_t h = rng::fnv1a64("");
    for (const auto& k : keys) h = rng::splitmix64(h ^ rng::fnv1a64(k));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%zu-%016" PRIx64, jobs.size(), h);
    return buf;
}

std::vector<BenchRecord> run_sweep(const std::vector<std::filesystem::path>& jobs, const SweepOptions& opts,
                                   const Launcher& launch) {
    if (opts.strategies.empty() || opts.worker_counts.empty() || opts.repeats < 1) {
        throw Error(ErrorCode::kConfig, "sweep needs strategies, worker counts and at least one repeat");
    }
    for (auto w : opts.worker_counts) {
        if (w < 1) throw Error(ErrorCode::kConfig, "worker counts must be >= 1");
    }
    const std::string set = job_set_id(jobs);
    std::vector<BenchRecord> records;
    bool touched = false;
    for (std::size_t rep = 0; rep < opts.repeats; ++rep) {
        for (auto strategy : opts.strategies) {
            for (auto w : opts.worker_counts) {
                BenchRecord r;
                r.n_cpus = static_cast<std::uint32_t>(w + 1);
                r.strategy = strategy;
                r.job_count = jobs.size();
                r.job_set = set;
                r.repeat = rep;
                r.warm_cache = touched;
                r.run_id = std::string(dispatch::strategy_name(strategy)) + "-w" + std::to_string(w) + "-r" +
                           std::to_string(rep);
                dispatch::MasterOptions mo;
                mo.strategy = strategy;
                mo.batch = opts.batch;
                try {
                    const auto report = launch(jobs, mo, w);
                    r.wall_time = report.wall_time;
                    const auto bad = std::count_if(report.outcomes.begin(), report.outcomes.end(),
                                                   [](const auto& o) { return !o.result.ok(); });
                    if (report.outcomes.size() != jobs.size() || bad > 0) {
                        r.failed = true;
                        r.error = std::to_string(bad) + " of " + std::to_string(jobs.size()) + " jobs failed";
                    } else if (!(r.wall_time > 0.0)) {
                        r.failed = true;
                        r.error = "no measurable wall time";
                    }
                } catch (const std::exception& e) {
                    r.failed = true;
                    r.error = e.what();
                }
                touched = true;
                if (opts.on_record) opts.on_record(r);
                records.push_back(std::move(r));
            }
        }
    }
    return records;
}

Launcher thread_launcher(dispatch::Pricer pricer) {
    return [pricer](const std::vector<std::filesystem::path>& jobs, const dispatch::MasterOptions& opts,
                    std::size_t workers) {
        auto eps = transport::spawn_local(workers);
        std::vector<std::thread> threads;
        for (std::size_t r = 1; r <= workers; ++r) {
            threads.emplace_back([&, r] {
                try {
                    dispatch::run_worker(*eps[r], opts.strategy, pricer);
                } catch (const Error&) {
                    // The master reports the loss.
                }
                eps[r]->close();
            });
        }
        std::optional<dispatch::RunReport> report;
        std::exception_ptr failure;
        try {
            report = dispatch::run_master(jobs, opts, *eps[0]);
        } catch (...) {
            failure = std::current_exception();
            eps[0]->close();
        }
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
        return *report;
    };
}

Launcher process_launcher(std::filesystem::path executable, std::vector<std::string> extra_worker_args) {
    return [executable, extra_worker_args](const std::vector<std::filesystem::path>& jobs,
                                           const dispatch::MasterOptions& opts, std::size_t workers) {
        using namespace std::chrono_literals;
        transport::Listener listener("127.0.0.1:0");
        const std::string addr = "127.0.0.1:" + std::to_string(listener.port());
        std::vector<std::string> args{executable.string(), "worker", "--connect", addr};
        args.insert(args.end(), extra_worker_args.begin(), extra_worker_args.end());
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);

        std::vector<pid_t> children;
        auto reap = [&](bool kill_first) {
            for (pid_t pid : children) {
                if (kill_first) ::kill(pid, SIGTERM);
                int status = 0;
                ::waitpid(pid, &status, 0);
            }
            children.clear();
        };
        for (std::size_t i = 0; i < workers; ++i) {
            pid_t pid = 0;
            if (::posix_spawn(&pid, executable.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
                reap(true);
                throw Error(ErrorCode::kTransport, "cannot start worker process " + executable.string());
            }
            children.push_back(pid);
        }
        try {
            auto master = listener.accept(workers, 60s, static_cast<std::uint32_t>(opts.strategy));
            auto report = dispatch::run_master(jobs, opts, *master);
            master->close();
            reap(false);
            return report;
        } catch (...) {
            reap(true);
            throw;
        }
    };
}

std::vector<CsvRow> csv_rows(const std::vector<BenchRecord>& records) {
    std::vector<CsvRow> rows;
    for (auto strategy : dispatch::kAllStrategies) {
        const auto best = best_runs(records, strategy);
        if (best.empty()) continue;
        for (const auto& row : speedup_table(records, strategy).rows) {
            rows.push_back({row.n_cpus, strategy, row.time, row.ratio});
        }
    }
    return rows;
}

std::string to_csv(const std::vector<BenchRecord>& records) {
    std::string out = "n_cpus,strategy,time_s,ratio\n";
    for (const auto& r : csv_rows(records)) {
        out += std::to_string(r.n_cpus) + "," + std::string(dispatch::strategy_name(r.strategy)) + "," +
               fmt("%.17g", r.time_s) + "," + fmt("%.17g", r.ratio) + "\n";
    }
    return out;
}

std::vector<CsvRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "n_cpus,strategy,time_s,ratio") {
        throw Error(ErrorCode::kConfig, "unexpected CSV header");
    }
    std::vector<CsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 4) throw Error(ErrorCode::kConfig, "bad CSV row: " + line);
        char* end = nullptr;
        CsvRow row;
        const unsigned long n = std::strtoul(cells[0].c_str(), &end, 10);
        if (*end != '\0') throw Error(ErrorCode::kConfig, "bad n_cpus: " + cells[0]);
        row.n_cpus = static_cast<std::uint32_t>(n);
        row.strategy = dispatch::strategy_from_name(cells[1]);
        row.time_s = std::strtod(cells[2].c_str(), &end);
        if (*end != '\0') throw Error(ErrorCode::kConfig, "bad time: " + cells[2]);
        row.ratio = std::strtod(cells[3].c_str(), &end);
        if (*end != '\0') throw Error(ErrorCode::kConfig, "bad ratio: " + cells[3]);
        rows.push_back(row);
    }
    return rows;
}

std::string runs_csv(const std::vector<BenchRecord>& records) {
    std::string out = "run_id,n_cpus,strategy,repeat,time_s,jobs,warm_cache,status\n";
    for (const auto& r : records) {
        std::string status = r.failed ? "failed: " + r.error : "ok";
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out += r.run_id + "," + std::to_string(r.n_cpus) + "," + std::string(dispatch::strategy_name(r.strategy)) +
               "," + std::to_string(r.repeat) + "," + fmt("%.17g", r.wall_time) + "," + std::to_string(r.job_count) +
               "," + (r.warm_cache ? "warm" : "cold") + "," + status + "\n";
    }
    return out;
}

std::vector<BenchRecord> parse_runs_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "run_id,n_cpus,strategy,repeat,time_s,jobs,warm_cache,status") {
        throw Error(ErrorCode::kConfig, "unexpected runs CSV header");
    }
    std::vector<BenchRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() != 8) throw Error(ErrorCode::kConfig, "bad runs CSV row: " + line);
        auto number = [&](const std::string& cell) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') throw Error(ErrorCode::kConfig, "bad number in runs CSV: " + cell);
            return v;
        };
        BenchRecord r;
        r.run_id = cells[0];
        r.n_cpus = static_cast<std::uint32_t>(number(cells[1]));
        r.strategy = dispatch::strategy_from_name(cells[2]);
        r.repeat = static_cast<std::size_t>(number(cells[3]));
        r.wall_time = number(cells[4]);
        r.job_count = static_cast<std::size_t>(number(cells[5]));
        r.warm_cache = cells[6] == "warm";
        r.job_set = "runs.csv";
        if (cells[7] != "ok") {
            r.failed = true;
            r.error = cells[7].rfind("failed: ", 0) == 0 ? cells[7].substr(8) : cells[7];
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string to_markdown(const std::vector<BenchRecord>& records) {
    std::map<std::uint32_t, std::map<Strategy, SpeedupRow>> grid;
    for (auto strategy : dispatch::kAllStrategies) {
        if (best_runs(records, strategy).empty()) continue;
        for (const auto& row : speedup_table(records, strategy).rows) grid[row.n_cpus][strategy] = row;
    }
    for (const auto& r : records) grid[r.n_cpus];

    std::ostringstream md;
    md << "| number of CPUs";
    for (auto s : dispatch::kAllStrategies) {
        md << " | Time " << dispatch::strategy_label(s) << " | Speedup ratio " << dispatch::strategy_label(s);
    }
    md << " |\n|---:";
    for (std::size_t i = 0; i < 2 * std::size(dispatch::kAllStrategies); ++i) md << "|---:";
    md << "|\n";
    for (const auto& [n, cells] : grid) {
        md << "| " << n;
        for (auto s : dispatch::kAllStrategies) {
            if (auto it = cells.find(s); it != cells.end()) {
                md << " | " << fmt("%.6g", it->second.time) << " | " << fmt("%.6g", it->second.ratio);
            } else {
                md << " |  | ";
            }
        }
        md << " |\n";
    }

    md << "\n| strategy | CPUs | runs | failed | min (s) | mean (s) | max (s) |\n"
          "|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& s : summarize(records)) {
        md << "| " << dispatch::strategy_label(s.strategy) << " | " << s.n_cpus << " | " << s.runs << " | "
           << s.failures << " | " << fmt("%.6g", s.min) << " | " << fmt("%.6g", s.mean) << " | "
           << fmt("%.6g", s.max) << " |\n";
    }

    md << "\nTimes are the fastest successful repeat, measured at the master from the first send to the last "
          "result.\n"
          "Speedup ratio = T_base * (n_base - 1) / ((n - 1) * T_n), where n counts CPUs including the master, "
          "so n - 1 is the number of workers. A definition dividing by the CPU count n instead of the worker "
          "count gives different values; these ratios use worker counts.\n";
    return md.str();
}

void emit_report(const std::vector<BenchRecord>& records, const std::filesystem::path& dir) {
    if (records.empty()) throw Error(ErrorCode::kConfig, "no records to report");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
    auto write = [&](const char* name, const std::string& text) {
        codec::write_file(dir / name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    };
    write("bench.csv", to_csv(records));
    write("runs.csv", runs_csv(records));
    write("bench.md", to_markdown(records));
}

}  // namespace riskbench::bench
