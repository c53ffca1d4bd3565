// Exit-code and output contract of the command-line tool; drives the real
// binary through std::system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef ERGO_CLI_PATH
#define ERGO_CLI_PATH "ergo"
#endif

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string& args) {
    const std::string out_path = "cli_test_out.txt";
    const std::string cmd = std::string(ERGO_CLI_PATH) + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out_path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::remove(out_path.c_str());
    return {WEXITSTATUS(status), ss.str()};
}

}  // namespace

TEST_CASE("solve smoke run prints slem and writes the solution with a manifest") {
    const RunResult r = run(
        "solve --graph fig2-directed --weights uniform --method modified-upper-bound "
        "--out cli_sol.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("slem") != std::string::npos);
    std::ifstream sol("cli_sol.json");
    REQUIRE(sol.good());
    std::stringstream ss;
    ss << sol.rdbuf();
    CHECK(ss.str().find("\"manifest\"") != std::string::npos);
    std::ifstream manifest("cli_sol.json.manifest.json");
    CHECK(manifest.good());
    std::remove("cli_sol.json");
    std::remove("cli_sol.json.manifest.json");
}

TEST_CASE("fmrmc on the directed benchmark graph warns about removed edges") {
    const RunResult r = run(
        "solve --graph fig2-directed --weights uniform --method fmrmc --out cli_f.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("1->4") != std::string::npos);
    CHECK(r.out.find("6->7") != std::string::npos);
    std::remove("cli_f.json");
    std::remove("cli_f.json.manifest.json");
}

TEST_CASE("unknown method exits with the parse-error code") {
    CHECK(run("solve --graph fig2-directed --method nonsense --out x.json").exit_code == 2);
    CHECK(run("frobnicate").exit_code == 2);
    CHECK(run("solve").exit_code == 2);  // missing required --graph
}

TEST_CASE("invalid graphs exit with the validation code") {
    {
        std::ofstream f("cli_bad_graph.json");
        f << R"({"nodes": 2, "self_loops": true, "edges": [], "undirected_edges": []})";
    }
    const RunResult r =
        run("solve --graph cli_bad_graph.json --weights uniform --out cli_x.json");
    CHECK(r.exit_code == 3);
    std::remove("cli_bad_graph.json");
}

TEST_CASE("unreadable input exits with the parse code") {
    CHECK(run("solve --graph no_such_file.json --out cli_x.json").exit_code == 2);
    CHECK(run("sequence --solution no_such_file.json --out cli_x.json").exit_code == 2);
    CHECK(run("simulate --config no_such_file.json --out cli_x.csv").exit_code == 2);
}

TEST_CASE("bench csv has the documented header and histogram sidecar") {
    const RunResult r = run(
        "bench-slem --graph fig2-undirected --trials 2 --seed 1 --out cli_bench.csv "
        "--hist-bins 10");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("mean slem") != std::string::npos);
    std::ifstream csv("cli_bench.csv");
    REQUIRE(csv.good());
    std::string line;
    std::getline(csv, line);
    CHECK(line.find("# manifest: cli_bench.csv.manifest.json") == 0);
    std::getline(csv, line);
    CHECK(line == "trial,method,slem,objective,wall_ms");
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2 * 4);
    std::ifstream hist("cli_bench_hist.csv");
    CHECK(hist.good());
    std::remove("cli_bench.csv");
    std::remove("cli_bench_hist.csv");
    std::remove("cli_bench.csv.manifest.json");
}

TEST_CASE("sequence command round trips through a solution file") {
    CHECK(run("solve --graph fig2-undirected --weights uniform --method metropolis-hastings "
              "--out cli_mh.json")
              .exit_code == 0);
    const RunResult r = run(
        "sequence --solution cli_mh.json --start 0 --K 10 --rollouts 16 --seed 4 --out "
        "cli_seq.json");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("tv_cost") != std::string::npos);
    std::ifstream seq("cli_seq.json");
    REQUIRE(seq.good());
    std::stringstream ss;
    ss << seq.rdbuf();
    CHECK(ss.str().find("\"K\": 10") != std::string::npos);
    std::remove("cli_mh.json");
    std::remove("cli_mh.json.manifest.json");
    std::remove("cli_seq.json");
    std::remove("cli_seq.json.manifest.json");
}

TEST_CASE("simulate with the random policy only avoids the solver") {
    {
        std::ofstream f("cli_sim.json");
        f << R"({"trials": 1, "steps": 3, "structure_points_per_node": 60,
                 "anomaly_points": 30, "observations_per_visit": 30, "seed": 2})";
    }
    const RunResult r =
        run("simulate --config cli_sim.json --policies random --out cli_sim.csv");
    CHECK(r.exit_code == 0);
    std::ifstream csv("cli_sim.csv");
    REQUIRE(csv.good());
    std::string line;
    std::getline(csv, line);
    CHECK(line.find("# manifest:") == 0);
    std::getline(csv, line);
    CHECK(line ==
          "trial,policy,bce_anomalous,bce_all,bce_anomalous_mean_conv,bce_all_mean_conv,visits");
    std::getline(csv, line);
    CHECK(line.find("0,random,") == 0);
    std::remove("cli_sim.json");
    std::remove("cli_sim.csv");
    std::remove("cli_sim.csv.manifest.json");
    std::remove("cli_sim_summary.txt");
}
