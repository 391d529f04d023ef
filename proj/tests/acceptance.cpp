// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is nonzero when a criterion fails, except for the scaled
// speedup experiment on a machine with fewer cores than its 4 workers plus
// master; that line still prints FAIL with the core count. --strict makes
// every failure fatal.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "generators.hpp"
#include "golden_specs.hpp"
#include "oracles.hpp"
#include "published.hpp"
#include "riskbench/bench.hpp"
#include "riskbench/codec.hpp"
#include "riskbench/pricing.hpp"
#include "toy.hpp"

using namespace riskbench;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;  // measurements, printed on every run
    std::vector<std::string> misses;  // failed sub-checks
    bool hardware_limited = false;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            misses.push_back(what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::map<std::string, double> price_map(const dispatch::RunReport& r) {
    std::map<std::string, double> m;
    for (const auto& o : r.outcomes) m[o.problem_id] = o.result.price;
    return m;
}

bool exactly_once(const dispatch::RunReport& r, const std::vector<fs::path>& jobs) {
    std::vector<std::string> got, want;
    for (const auto& o : r.outcomes) got.push_back(o.problem_id);
    for (const auto& j : jobs) want.push_back(j.stem().string());
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    return got == want;
}

// ---- 1

Outcome portfolio_fidelity() {
    Outcome out;
    toy::Dir a("acc-pf-a"), b("acc-pf-b");
    PortfolioConfig cfg;
    cfg.output_dir = a.path;
    const auto t0 = std::chrono::steady_clock::now();
    const auto specs = generate_portfolio(cfg);
    const double took = seconds_since(t0);
    cfg.output_dir = b.path;
    generate_portfolio(cfg);

    std::map<ProblemKind, std::size_t> counts;
    for (const auto& s : specs) ++counts[s.kind];
    const std::pair<ProblemKind, std::size_t> expected[] = {
        {ProblemKind::kVanillaCall, 1952},  {ProblemKind::kBarrierDownOutCall, 1952},
        {ProblemKind::kAmericanPutPde, 1952}, {ProblemKind::kBasketPutMc, 525},
        {ProblemKind::kLocalVolCallMc, 1025}, {ProblemKind::kAmericanBasketPutLsmc, 525},
    };
    out.check(specs.size() == 7931, "total " + std::to_string(specs.size()));
    for (const auto& [k, n] : expected) {
        out.check(counts[k] == n, std::string(kind_name(k)) + " count " + std::to_string(counts[k]));
    }
    const auto files_a = list_jobs(a.path), files_b = list_jobs(b.path);
    bool identical = files_a.size() == files_b.size() && files_a.size() == specs.size();
    for (std::size_t i = 0; identical && i < files_a.size(); ++i) {
        identical = files_a[i].filename() == files_b[i].filename() &&
                    codec::read_file(files_a[i]) == codec::read_file(files_b[i]);
    }
    out.check(identical, "regeneration not byte-identical");
    out.check(took < 10.0, "generation took " + num(took) + " s");
    out.note(std::to_string(specs.size()) + " problems in " + num(took, 3) + " s, regeneration byte-identical");
    return out;
}

// ---- 2

Outcome table_arithmetic() {
    Outcome out;
    double worst = 0.0;
    std::size_t rows = 0;
    auto run = [&](const std::vector<published::Published>& table, dispatch::Strategy s, std::string_view name) {
        std::vector<bench::BenchRecord> records;
        for (const auto& p : table) {
            bench::BenchRecord r;
            r.n_cpus = p.n;
            r.wall_time = p.time;
            r.strategy = s;
            records.push_back(r);
        }
        const auto computed = bench::speedup_table(records, s);
        for (std::size_t i = 0; i < table.size(); ++i) {
            const double d = std::abs(computed.rows[i].ratio - table[i].ratio);
            worst = std::max(worst, d);
            ++rows;
            out.check(d <= 5e-4, std::string(name) + " n=" + std::to_string(table[i].n) + " off by " + num(d));
        }
    };
    run(published::kLarge, dispatch::Strategy::kSerializedLoad, "large portfolio");
    for (const auto& [s, table] : published::kFull) run(table, s, dispatch::strategy_label(s));
    bench::BenchRecord base, r;
    base.n_cpus = 2;
    base.wall_time = 838.004;
    r.n_cpus = 4;
    r.wall_time = 285.356;
    out.note(std::to_string(rows) + " published rows, max deviation " + num(worst, 3) + "; 838.004 & 285.356 -> " +
             num(bench::speedup_ratio(base, r), 4));
    return out;
}

// ---- 3

ProblemSpec spec_of(ProblemKind kind, double strike, double maturity) {
    ProblemSpec s;
    s.id = "acceptance-" + std::string(kind_name(kind));
    s.kind = kind;
    s.strike = strike;
    s.maturity = maturity;
    s.seed = 2024;
    return s;
}

Outcome pricing_oracles() {
    Outcome out;

    double bs_err = 0.0;
    for (double r : {0.0, 0.05}) {
        for (double sigma : {0.1, 0.2, 0.4}) {
            for (double k : {70.0, 100.0, 130.0}) {
                for (double t : {0.25, 1.0, 3.0}) {
                    const auto mkt = MarketParams::scalar_market(100, r, sigma);
                    auto call = spec_of(ProblemKind::kVanillaCall, k, t);
                    auto put = spec_of(ProblemKind::kVanillaPut, k, t);
                    bs_err = std::max({bs_err,
                                       std::abs(bs_vanilla_price(call, mkt).price -
                                                oracle::quadrature_call(100, k, r, sigma, t)),
                                       std::abs(bs_vanilla_price(put, mkt).price -
                                                oracle::quadrature_put(100, k, r, sigma, t))});
                }
            }
        }
    }
    out.check(bs_err <= 1e-5, "Black-Scholes vs quadrature " + num(bs_err));
    out.note("BS vs quadrature " + num(bs_err, 2));

    // Barrier PDE at the portfolio discretization on 5 strikes x 4 maturities.
    double barrier_err = 0.0;
    {
        const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
        for (double k : {70.0, 85.0, 100.0, 115.0, 130.0}) {
            for (double t : {1.0 / 3.0, 7.0 / 12.0, 1.0, 2.0}) {
                auto s = spec_of(ProblemKind::kBarrierDownOutCall, k, t);
                s.barrier = 80.0;
                s.set_param("space_nodes", 400);
                s.set_param("dt", 2.0 / 365.0);
                const double e = rel(pde_barrier_down_out_call(s, mkt).price, closed_form_down_out_call(s, mkt).price);
                barrier_err = std::max(barrier_err, e);
                out.check(e <= 0.005, "barrier K=" + num(k) + " T=" + num(t, 3) + " rel " + num(e));
            }
        }
    }
    out.note("barrier PDE vs closed form " + num(100 * barrier_err, 3) + "%");

    double american_err = 0.0;
    for (double k : {90.0, 100.0, 110.0}) {
        for (double t : {0.5, 1.0}) {
            const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
            const double tree = oracle::crr_put(100, k, 0.05, 0.2, t, 1000, true);
            const double e = rel(pde_american_put(spec_of(ProblemKind::kAmericanPutPde, k, t), mkt).price, tree);
            american_err = std::max(american_err, e);
            out.check(e <= 0.002, "American K=" + num(k) + " T=" + num(t) + " rel " + num(e));
        }
    }
    out.note("American PDE vs tree " + num(100 * american_err, 3) + "%");

    double r0_err = 0.0;
    for (double k : {80.0, 100.0, 120.0}) {
        const auto mkt = MarketParams::scalar_market(100, 0.0, 0.2);
        const double e = rel(pde_american_put(spec_of(ProblemKind::kAmericanPutPde, k, 1), mkt).price,
                             bs_put(100, k, 0.0, 0.0, 0.2, 1.0));
        r0_err = std::max(r0_err, e);
        out.check(e <= 0.001, "r=0 American K=" + num(k) + " rel " + num(e));
    }
    out.note("r=0 American vs European " + num(100 * r0_err, 3) + "%");

    double worst_z = 0.0;
    {
        const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
        for (double k : {90.0, 100.0, 110.0}) {
            auto s = spec_of(ProblemKind::kBasketPutMc, k, 1.0);
            s.set_param("samples", 200000);
            const auto res = mc_basket_put(s, mkt);
            const double z = std::abs(res.price - bs_put(100, k, 0.05, 0.0, 0.2, 1.0)) / *res.std_error;
            worst_z = std::max(worst_z, z);
            out.check(z < 3.0, "d=1 basket K=" + num(k) + " z=" + num(z, 3));
        }
        const LocalVolSurface flat{0.2, 0.0, 0.0, 0.01, 2.0, 100};
        for (double k : {90.0, 110.0}) {
            auto s = spec_of(ProblemKind::kLocalVolCallMc, k, 1.0);
            s.set_param("samples", 100000);
            const auto res = mc_localvol_call(s, mkt, flat);
            const double z = std::abs(res.price - bs_call(100, k, 0.05, 0.0, 0.2, 1.0)) / *res.std_error;
            worst_z = std::max(worst_z, z);
            out.check(z < 3.0, "flat local vol K=" + num(k) + " z=" + num(z, 3));
        }
    }
    out.note("MC vs Black-Scholes worst " + num(worst_z, 3) + " SE");

    {
        const auto mkt = MarketParams::equicorrelated(7, 100, 0.05, 0.2, 0.3);
        for (double k : {90.0, 100.0, 110.0}) {
            auto am = spec_of(ProblemKind::kAmericanBasketPutLsmc, k, 2.0);
            am.dimension = 7;
            am.set_param("paths", 20000);
            am.set_param("exercise_per_year", 10);
            auto eu = spec_of(ProblemKind::kBasketPutMc, k, 2.0);
            eu.dimension = 7;
            eu.set_param("samples", 20000);
            const auto a = lsmc_american_basket_put(am, mkt);
            const auto e = mc_basket_put(eu, mkt);
            out.check(a.price >= e.price - 3.0 * std::hypot(*a.std_error, *e.std_error),
                      "LSMC below European K=" + num(k));
        }
    }
    {
        const auto mkt = MarketParams::scalar_market(100, 0.05, 0.2);
        auto s = spec_of(ProblemKind::kAmericanBasketPutLsmc, 100, 1.0);
        s.set_param("paths", 400000);
        s.set_param("exercise_per_year", 50);
        const double tree = oracle::crr_put(100, 100, 0.05, 0.2, 1.0, 1000, true);
        const double e = rel(lsmc_american_basket_put(s, mkt).price, tree);
        out.check(e <= 0.01, "d=1 LSMC vs tree rel " + num(e));
        out.note("d=1 LSMC vs tree " + num(100 * e, 3) + "%");
    }
    return out;
}

// ---- 4

Outcome codec_properties() {
    Outcome out;
    gen::Rng g(4);
    std::size_t bad_round = 0, bad_compress = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto spec = gen::problem(g);
        const auto blob = codec::encode(spec);
        if (codec::decode(blob) != spec || codec::encode(spec) != blob) ++bad_round;
        const auto z = codec::compress(blob);
        if (codec::decompress(z) != blob || codec::decode(z) != spec) ++bad_compress;
    }
    out.check(bad_round == 0, std::to_string(bad_round) + " round-trip failures");
    out.check(bad_compress == 0, std::to_string(bad_compress) + " compression failures");
    const std::pair<const char*, ProblemSpec> goldens[] = {
        {"vanilla_default.rbp", golden::vanilla()},
        {"barrier.rbp", golden::barrier()},
        {"lsmc_basket.rbp", golden::lsmc()},
    };
    for (const auto& [name, spec] : goldens) {
        const auto bytes = codec::read_file(fs::path(RISKBENCH_TEST_DATA) / "golden" / name);
        out.check(codec::encode(spec).payload == bytes, std::string("golden bytes differ: ") + name);
    }
    out.note("10000 randomized specs, 3 golden images");
    return out;
}

// ---- 5

Outcome dispatch_correctness() {
    Outcome out;
    toy::Dir dir("acc-dispatch");
    const auto jobs = toy::mixed_jobs(dir.path, 200);
    std::optional<std::map<std::string, double>> reference;
    for (auto strategy : dispatch::kAllStrategies) {
        for (std::size_t w : {1, 2, 4}) {
            dispatch::MasterOptions opts;
            opts.strategy = strategy;
            const auto rep = toy::run_local(jobs, opts, w);
            const std::string label = std::string(dispatch::strategy_name(strategy)) + " W=" + std::to_string(w);
            out.check(exactly_once(rep, jobs), label + " not exactly-once");
            out.check(std::all_of(rep.outcomes.begin(), rep.outcomes.end(), [](const auto& o) { return o.result.ok(); }),
                      label + " has failed jobs");
            const auto prices = price_map(rep);
            if (!reference) reference = prices;
            out.check(prices == *reference, label + " prices differ");
        }
    }
    out.note("200 jobs x 3 strategies x {1,2,4} workers, price maps bit-identical");
    return out;
}

// ---- 6

Outcome scheduling() {
    Outcome out;
    toy::Dir dir("acc-sched");
    std::mt19937_64 g(6);
    std::uniform_real_distribution<double> d(0.005, 0.08);
    std::vector<double> durations(40);
    for (auto& x : durations) x = d(g);
    durations[11] = 0.3;
    const auto jobs = toy::timed_jobs(dir.path / "random", durations);
    double slack = 1e9;
    for (std::size_t w : {1, 2, 3, 5, 8}) {
        const auto rep = toy::run_local(jobs, {}, w, toy::sleeping_pricer);
        const double bound = toy::greedy_bound(durations, w) + 0.05;
        slack = std::min(slack, bound - rep.wall_time);
        out.check(rep.wall_time <= bound, "W=" + std::to_string(w) + " makespan " + num(rep.wall_time) +
                                              " > bound " + num(bound));
    }
    const auto hetero = toy::timed_jobs(dir.path / "hetero", {5.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    const auto rep = toy::run_local(hetero, {}, 2, toy::sleeping_pricer);
    out.check(rep.wall_time <= 5.2, "{5s,1s x5} W=2 took " + num(rep.wall_time));
    out.note("min slack to bound " + num(slack * 1000, 3) + " ms; {5s,1s x5} W=2 in " + num(rep.wall_time, 4) + " s");
    return out;
}

// ---- 7

std::optional<double> ratio_at(const std::vector<bench::BenchRecord>& records, dispatch::Strategy s,
                               std::uint32_t n_cpus) {
    for (const auto& row : bench::speedup_table(records, s).rows) {
        if (row.n_cpus == n_cpus) return row.ratio;
    }
    return std::nullopt;
}

std::optional<double> best_time(const std::vector<bench::BenchRecord>& records, dispatch::Strategy s,
                                std::uint32_t n_cpus) {
    for (const auto& row : bench::speedup_table(records, s).rows) {
        if (row.n_cpus == n_cpus) return row.time;
    }
    return std::nullopt;
}

Outcome scaled_speedup() {
    Outcome out;
    const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
    const auto launch = bench::process_launcher(RISKBENCH_CLI, {"--log-level", "error"});

    toy::Dir dir("acc-speedup");
    const auto mini = toy::mixed_jobs(dir.path / "mini", 500, 0.002);
    bench::SweepOptions sweep;
    sweep.strategies = {dispatch::Strategy::kSerializedLoad};
    sweep.worker_counts = {1, 2, 4, 8};
    sweep.repeats = 2;
    const auto records = bench::run_sweep(mini, sweep, launch);
    for (const auto& r : records) out.check(!r.failed, r.run_id + " failed: " + r.error);
    std::string row;
    for (const auto& t : bench::speedup_table(records, dispatch::Strategy::kSerializedLoad).rows) {
        row += " n=" + std::to_string(t.n_cpus) + ":" + num(t.time, 4) + "s/" + num(t.ratio, 3);
    }
    const auto r4 = ratio_at(records, dispatch::Strategy::kSerializedLoad, 5);
    out.check(r4 && *r4 >= 0.85, "serialized-load ratio at 4 workers " + (r4 ? num(*r4, 4) : "missing") + " < 0.85");
    out.note("500-problem sload sweep" + row);

    const auto vanilla = toy::vanilla_jobs(dir.path / "vanilla", 1952);
    bench::SweepOptions fast;
    fast.strategies = {dispatch::Strategy::kFullLoad, dispatch::Strategy::kSerializedLoad};
    fast.worker_counts = {4};
    fast.repeats = 9;  // ~80 ms runs; the minimum needs several samples to settle
    const auto vrecords = bench::run_sweep(vanilla, fast, launch);
    for (const auto& r : vrecords) out.check(!r.failed, r.run_id + " failed: " + r.error);
    const auto full = best_time(vrecords, dispatch::Strategy::kFullLoad, 5);
    const auto sload = best_time(vrecords, dispatch::Strategy::kSerializedLoad, 5);
    out.check(full && sload && *sload <= *full, "vanilla sload " + (sload ? num(*sload, 4) : "missing") +
                                                    " s > full load " + (full ? num(*full, 4) : "missing") + " s");
    if (full && sload) {
        out.note(std::to_string(vanilla.size()) + " vanilla jobs, 4 workers: full load " + num(*full, 4) +
                 " s, sload " + num(*sload, 4) + " s");
    }
    out.note(std::to_string(cores) + " hardware threads");
    if (!out.pass && cores < 5 && r4 && std::all_of(out.misses.begin(), out.misses.end(), [](const auto& m) {
            return m.rfind("serialized-load ratio at 4 workers", 0) == 0;
        })) {
        out.hardware_limited = true;
        out.note("4 workers plus master need 5 cores, machine has " + std::to_string(cores));
    }
    return out;
}

// ---- 8

Outcome transport_conformance() {
    Outcome out;
    auto fifo_and_probe = [&](std::vector<std::unique_ptr<transport::Endpoint>>& eps, const std::string& label) {
        const std::size_t per = 500;
        std::vector<std::thread> senders;
        for (std::size_t r = 1; r < eps.size(); ++r) {
            senders.emplace_back([&, r] {
                for (std::uint32_t i = 0; i < per; ++i) {
                    std::vector<std::uint8_t> payload(4 + (i % 37));
                    std::memcpy(payload.data(), &i, 4);
                    eps[r]->send(0, transport::Tag::kResult, payload);
                }
            });
        }
        std::map<std::uint32_t, std::uint32_t> next;
        bool fifo = true, agree = true;
        for (std::size_t k = 0; k < per * (eps.size() - 1); ++k) {
            const auto info = eps[0]->probe(transport::kAny, transport::Tag::kResult);
            const auto f = eps[0]->recv(info.source, transport::Tag::kResult);
            agree = agree && f.payload.size() == info.byte_count && f.source == info.source;
            std::uint32_t i = 0;
            std::memcpy(&i, f.payload.data(), 4);
            fifo = fifo && i == next[f.source]++;
        }
        for (auto& t : senders) t.join();
        out.check(fifo, label + " FIFO violated");
        out.check(agree, label + " probe/recv disagree");
    };
    {
        auto eps = transport::spawn_local(3);
        fifo_and_probe(eps, "in-process");
    }
    {
        transport::Listener listener("127.0.0.1:0");
        const auto addr = "127.0.0.1:" + std::to_string(listener.port());
        std::vector<std::unique_ptr<transport::Endpoint>> eps(4);
        std::vector<std::thread> connecting;
        for (std::size_t i = 1; i < eps.size(); ++i) {
            connecting.emplace_back([&, i] { eps[i] = transport::connect(addr, 5s); });
        }
        eps[0] = listener.accept(3, 5s, 0);
        for (auto& t : connecting) t.join();
        fifo_and_probe(eps, "tcp");
        for (auto& e : eps) e->close();
    }

    toy::Dir dir("acc-backends");
    const auto jobs = toy::mixed_jobs(dir.path, 60);
    for (auto strategy : dispatch::kAllStrategies) {
        dispatch::MasterOptions opts;
        opts.strategy = strategy;
        const auto local = toy::run_local(jobs, opts, 3);
        const auto tcp = toy::run_tcp(jobs, opts, 3);
        const std::string label(dispatch::strategy_name(strategy));
        out.check(price_map(local) == price_map(tcp), label + " backends differ");
        out.check(exactly_once(tcp, jobs), label + " tcp not exactly-once");
    }
    out.note("FIFO and probe agreement on both backends; 60 jobs x 3 strategies identical over TCP");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    bool strict = false;
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--strict") == 0) {
            strict = true;
        } else {
            only.push_back(std::atoi(argv[i]));
        }
    }
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"portfolio fidelity", portfolio_fidelity},
        {"table arithmetic", table_arithmetic},
        {"pricing oracles", pricing_oracles},
        {"codec properties", codec_properties},
        {"dispatch correctness", dispatch_correctness},
        {"scheduling bound", scheduling},
        {"scaled speedup", scaled_speedup},
        {"transport conformance", transport_conformance},
    };
    int passed = 0, fatal = 0, run = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        ++run;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double took = seconds_since(t0);
        std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << " (" << num(took, 3)
                  << " s)";
        for (const auto& n : o.notes) std::cout << "; " << n;
        for (const auto& m : o.misses) std::cout << "; miss: " << m;
        std::cout << std::endl;
        if (o.pass) {
            ++passed;
        } else if (strict || !o.hardware_limited) {
            ++fatal;
        }
    }
    std::cout << passed << " of " << run << " criteria passed" << std::endl;
    return fatal == 0 ? 0 : 1;
}
