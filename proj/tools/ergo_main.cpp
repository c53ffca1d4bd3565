#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ergo/bench.hpp"
#include "ergo/chain.hpp"
#include "ergo/graph.hpp"
#include "ergo/parallel.hpp"
#include "ergo/sequencer.hpp"
#include "ergo/sim.hpp"
#include "ergo/version.hpp"

namespace {

using namespace ergo;
using nlohmann::json;

int exit_code_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::ParseError:
            return 2;
        case ErrorCode::ValidationError:
        case ErrorCode::NotIrreducible:
        case ErrorCode::Periodic:
        case ErrorCode::NotApplicable:
        case ErrorCode::EmptyStructure:
            return 3;
        default:
            return 4;  // numeric / solver failure
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_name(const std::string& output) { return output + ".manifest.json"; }

// The manifest carries the volatile run context (timestamp, full command
// line); data outputs reference it by name and stay byte-reproducible.
void write_manifest(const std::string& output, int argc, char** argv,
                    const std::string& config_path, std::uint64_t seed,
                    const std::vector<std::string>& outputs, const json& extra = {}) {
    std::string cmd;
    for (int i = 0; i < argc; ++i) {
        if (i) cmd += ' ';
        cmd += argv[i];
    }
    json j{{"command", cmd},
           {"config", config_path.empty() ? json(nullptr) : json(config_path)},
           {"seed", seed},
           {"version", kVersion},
           {"timestamp", iso_timestamp()},
           {"outputs", outputs}};
    if (!extra.is_null() && !extra.empty()) j["run_metadata"] = extra;
    std::ofstream out(manifest_name(output));
    if (!out) raise(ErrorCode::ValidationError, "cannot write manifest for " + output);
    out << j.dump(2) << "\n";
}

std::string basename_of(const std::string& path) {
    const auto pos = path.find_last_of('/');
    return pos == std::string::npos ? path : path.substr(pos + 1);
}

TargetDistribution parse_weights(const std::string& arg, int n) {
    Vector w;
    if (arg == "uniform") {
        w.assign(n, 1.0 / n);
        return TargetDistribution{w};
    }
    if (arg.find(',') != std::string::npos) {
        std::stringstream ss(arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) w.push_back(std::stod(tok));
    } else {
        std::ifstream in(arg);
        if (!in) raise(ErrorCode::ParseError, "cannot open weights file " + arg);
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '[') {
            try {
                w = json::parse(text).get<Vector>();
            } catch (const json::exception& e) {
                raise(ErrorCode::ParseError, e.what());
            }
        } else {
            std::stringstream vs(text);
            double v;
            while (vs >> v) w.push_back(v);
        }
    }
    if (static_cast<int>(w.size()) != n)
        raise(ErrorCode::ParseError, "expected " + std::to_string(n) + " weights, got " +
                                         std::to_string(w.size()));
    double sum = 0.0;
    for (double v : w) {
        if (!(v > 0.0)) raise(ErrorCode::ValidationError, "weights must be positive");
        sum += v;
    }
    for (double& v : w) v /= sum;
    return TargetDistribution{std::move(w)};
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct SolveArgs {
    std::string graph, weights = "uniform", method = "modified-upper-bound", out = "solution.json";
    std::uint64_t seed = 0;
    int max_iters = 50000;
    double tolerance = 1e-6;
    int restarts = 1;
};

int cmd_solve(const SolveArgs& a, int argc, char** argv) {
    const RegionGraph g = resolve_graph(a.graph);
    require_valid(g);
    const Method method = method_from_string(a.method);
    const TargetDistribution w = parse_weights(a.weights, g.node_count);
    SolverSettings settings;
    settings.max_iterations = a.max_iters;
    settings.tolerance = a.tolerance;
    settings.restarts = a.restarts;
    settings.seed = a.seed;
    const ChainSolution sol = solve_with_method(method, g, w, settings);
    if (!sol.removed_edges.empty()) {
        std::cerr << "warning: reversibility removed one-way edges:";
        for (const auto& [u, v] : sol.removed_edges) std::cerr << " " << u << "->" << v;
        std::cerr << "\n";
    }
    write_manifest(a.out, argc, argv, a.graph, a.seed, {a.out});
    save_solution(sol, a.out, basename_of(manifest_name(a.out)));
    std::cout << "slem " << fmt(sol.slem) << "\nobjective " << fmt(sol.objective_value) << "\n";
    return 0;
}

struct BenchArgs {
    std::string graph, out = "bench.csv";
    int trials = 1000;
    std::uint64_t seed = 0;
    int jobs = 0;
    bool timings = false;
    int hist_bins = 50;
};

int cmd_bench_slem(const BenchArgs& a, int argc, char** argv) {
    const RegionGraph g = resolve_graph(a.graph);
    const int jobs = resolve_jobs(a.jobs);
    const auto rows = run_slem_benchmark(g, a.trials, a.seed, jobs, a.timings);

    const std::string hist_path = a.out.size() > 4 && a.out.ends_with(".csv")
                                      ? a.out.substr(0, a.out.size() - 4) + "_hist.csv"
                                      : a.out + "_hist.csv";
    write_manifest(a.out, argc, argv, a.graph, a.seed, {a.out, hist_path},
                   json{{"jobs", jobs}, {"timings", a.timings}});
    const std::string mref = basename_of(manifest_name(a.out));

    std::ofstream csv(a.out);
    if (!csv) raise(ErrorCode::ValidationError, "cannot write " + a.out);
    csv << "# manifest: " << mref << "\n";
    csv << "trial,method,slem,objective,wall_ms\n";
    for (const BenchRow& r : rows)
        csv << r.trial << ',' << to_string(r.method) << ',' << fmt(r.slem) << ','
            << fmt(r.objective) << ',' << (a.timings ? fmt(r.wall_ms) : "0") << "\n";

    std::ofstream hist(hist_path);
    hist << "# manifest: " << mref << "\n";
    hist << "method,bin_lo,bin_hi,count\n";
    for (const HistogramRow& h : slem_histogram(rows, a.hist_bins))
        hist << to_string(h.method) << ',' << fmt(h.lo) << ',' << fmt(h.hi) << ',' << h.count
             << "\n";

    const auto means = mean_slem_by_method(rows);
    for (size_t m = 0; m < std::size(kBenchMethods); ++m)
        std::cout << "mean slem " << to_string(kBenchMethods[m]) << " " << fmt(means[m]) << "\n";
    return 0;
}

struct SequenceArgs {
    std::string solution, out = "sequence.json";
    int start = 0;
    int horizon = 10;
    int rollouts = 256;
    std::uint64_t seed = 0;
    int jobs = 0;
};

int cmd_sequence(const SequenceArgs& a, int argc, char** argv) {
    const ChainSolution sol = load_solution(a.solution);
    const Sequence seq =
        plan_sequence(sol, a.start, a.horizon, a.rollouts, a.seed, resolve_jobs(a.jobs));
    write_manifest(a.out, argc, argv, a.solution, a.seed, {a.out});
    save_sequence(seq, a.out, basename_of(manifest_name(a.out)));
    std::cout << "tv_cost " << fmt(seq.tv_cost) << "\n";
    return 0;
}

struct SimulateArgs {
    std::string config, policies = "random,greedy-max-entropy,entropy-ergodic",
                out = "simulation.csv";
    int trials = -1;
    long long seed = -1;
    int jobs = 0;
};

int cmd_simulate(const SimulateArgs& a, int argc, char** argv) {
    ScenarioConfig config = a.config.empty() ? ScenarioConfig{} : load_scenario_config(a.config);
    if (a.trials > 0) config.trials = a.trials;
    if (a.seed >= 0) config.seed = static_cast<std::uint64_t>(a.seed);

    std::vector<Policy> policies;
    {
        std::stringstream ss(a.policies);
        std::string tok;
        while (std::getline(ss, tok, ',')) policies.push_back(policy_from_string(tok));
        if (policies.empty()) raise(ErrorCode::ParseError, "no policies given");
    }
    const int jobs = resolve_jobs(a.jobs);
    const SimulationResult result = run_simulation(config, policies, jobs);

    const std::string summary_path = a.out.size() > 4 && a.out.ends_with(".csv")
                                         ? a.out.substr(0, a.out.size() - 4) + "_summary.txt"
                                         : a.out + "_summary.txt";
    const json meta{{"graph", config.graph_name},
                    {"node_belief", "max P(H1) over reference points (mean also reported)"},
                    {"random_policy_self_loops", false},
                    {"ibeam", {{"length", beam::length},
                               {"flange_width", beam::flange_width},
                               {"web_height", beam::web_height},
                               {"web_thickness", 2 * beam::web_half_thickness}}},
                    {"jobs", jobs}};
    write_manifest(a.out, argc, argv, a.config, config.seed, {a.out, summary_path}, meta);
    const std::string mref = basename_of(manifest_name(a.out));

    std::ofstream csv(a.out);
    if (!csv) raise(ErrorCode::ValidationError, "cannot write " + a.out);
    csv << "# manifest: " << mref << "\n";
    csv << "trial,policy,bce_anomalous,bce_all,bce_anomalous_mean_conv,bce_all_mean_conv,"
           "visits\n";
    for (int t = 0; t < config.trials; ++t) {
        for (size_t p = 0; p < policies.size(); ++p) {
            const TrialRecord& r = result.records[p][t];
            csv << t << ',' << to_string(policies[p]) << ',' << fmt(r.bce_anomalous) << ','
                << fmt(r.bce_all) << ',' << fmt(r.bce_anomalous_mean_conv) << ','
                << fmt(r.bce_all_mean_conv) << ',';
            for (size_t i = 0; i < r.visit_sequence.size(); ++i) {
                if (i) csv << '-';
                csv << r.visit_sequence[i];
            }
            csv << "\n";
        }
    }

    const std::string summary = format_summary(result);
    std::ofstream sf(summary_path);
    sf << "# manifest: " << mref << "\n" << summary;
    std::cout << summary;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ergodic Markov-chain planner for graph inspection"};
    app.set_version_flag("--version", ergo::kVersion);
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "design a transition matrix for a target");
    solve->add_option("--graph", solve_args.graph, "graph file or fig2-directed/fig2-undirected")
        ->required();
    solve->add_option("--weights", solve_args.weights, "uniform, comma list, or file");
    solve->add_option("--method", solve_args.method,
                      "metropolis-hastings | fmrmc | upper-bound | modified-upper-bound");
    solve->add_option("--out", solve_args.out, "solution JSON path");
    solve->add_option("--seed", solve_args.seed, "solver seed");
    solve->add_option("--max-iters", solve_args.max_iters, "solver iteration cap");
    solve->add_option("--tol", solve_args.tolerance, "solver tolerance");
    solve->add_option("--restarts", solve_args.restarts, "solver restarts");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench-slem", "compare all methods on random targets");
    bench->add_option("--graph", bench_args.graph, "graph file or builtin")->required();
    bench->add_option("--trials", bench_args.trials, "number of random targets");
    bench->add_option("--seed", bench_args.seed, "master seed");
    bench->add_option("--out", bench_args.out, "CSV path");
    bench->add_option("--jobs", bench_args.jobs, "worker cap (default: ERGO_JOBS or OpenMP)");
    bench->add_flag("--timings", bench_args.timings, "fill the wall_ms column (non-reproducible)");
    bench->add_option("--hist-bins", bench_args.hist_bins, "histogram bins");

    SequenceArgs seq_args;
    auto* seq = app.add_subcommand("sequence", "plan a traversal from a solved chain");
    seq->add_option("--solution", seq_args.solution, "solution JSON")->required();
    seq->add_option("--start", seq_args.start, "start node");
    seq->add_option("--K", seq_args.horizon, "planning horizon");
    seq->add_option("--rollouts", seq_args.rollouts, "rollout count");
    seq->add_option("--seed", seq_args.seed, "rollout seed");
    seq->add_option("--jobs", seq_args.jobs, "worker cap");

    seq->add_option("--out", seq_args.out, "sequence JSON path");

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "run the anomaly-detection experiment");
    sim->add_option("--config", sim_args.config, "scenario config JSON (defaults when omitted)");
    sim->add_option("--policies", sim_args.policies, "comma list: random,greedy,ergodic");
    sim->add_option("--trials", sim_args.trials, "override trial count");
    sim->add_option("--seed", sim_args.seed, "override master seed");
    sim->add_option("--out", sim_args.out, "per-trial CSV path");
    sim->add_option("--jobs", sim_args.jobs, "worker cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(solve)) return cmd_solve(solve_args, argc, argv);
        if (app.got_subcommand(bench)) return cmd_bench_slem(bench_args, argc, argv);
        if (app.got_subcommand(seq)) return cmd_sequence(seq_args, argc, argv);
        if (app.got_subcommand(sim)) return cmd_simulate(sim_args, argc, argv);
    } catch (const ergo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
