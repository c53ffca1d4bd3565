// Timing comparison between the serial reference kernels and their
// OpenMP-parallel counterparts. Results are also checked for equality, so a
// mismatch makes the benchmark fail loudly.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "ergo/bench.hpp"
#include "ergo/detector.hpp"
#include "ergo/parallel.hpp"
#include "ergo/sequencer.hpp"
#include "ergo/sim.hpp"

using namespace ergo;

namespace {

struct Timing {
    double serial_s = 0.0;
    double parallel_s = 0.0;
};

void report(const char* name, const Timing& t, int jobs) {
    std::printf("%-28s serial %8.3f s   omp(%d) %8.3f s   speedup %.2fx\n", name, t.serial_s,
                jobs, t.parallel_s, t.parallel_s > 0 ? t.serial_s / t.parallel_s : 0.0);
}

bool same_beliefs(const std::vector<ReferencePoint>& a, const std::vector<ReferencePoint>& b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].belief_h1 != b[i].belief_h1) return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    const int jobs = argc > 1 ? std::atoi(argv[1]) : resolve_jobs(0);
    const int reps = argc > 2 ? std::atoi(argv[2]) : 20;
    std::printf("jobs=%d reps=%d\n", jobs, reps);

    ScenarioConfig config;
    config.trials = 1;
    const Scenario scenario = generate_scenario(config, derive_seed(1, "bench-kernels"));

    // --- detector batch -----------------------------------------------------
    {
        RandomStream rng = observation_stream(derive_seed(1, "bench-kernels"), 0, 0);
        const auto obs = observe_node(scenario, config, 0, rng);
        Timing t;
        std::vector<ReferencePoint> serial_refs, parallel_refs;
        for (int r = 0; r < reps; ++r) {
            auto refs = scenario.nodes[0].reference;
            const double t0 = omp_get_wtime();
            reference::process_observation_batch_serial(refs, obs, config.detector);
            t.serial_s += omp_get_wtime() - t0;
            serial_refs = refs;

            refs = scenario.nodes[0].reference;
            const double t1 = omp_get_wtime();
            process_observation_batch(refs, obs, config.detector, jobs);
            t.parallel_s += omp_get_wtime() - t1;
            parallel_refs = refs;
        }
        if (!same_beliefs(serial_refs, parallel_refs)) {
            std::fprintf(stderr, "detector batch: serial and parallel beliefs differ\n");
            return 1;
        }
        report("detector batch (500x250)", t, jobs);
    }

    // --- rollout planning ----------------------------------------------------
    {
        const RegionGraph g = fig2_graph(true);
        const ChainSolution chain = metropolis_hastings(g, random_target(9, 7));
        Timing t;
        Sequence s1, s2;
        const int rollouts = 20000;
        for (int r = 0; r < reps; ++r) {
            const double t0 = omp_get_wtime();
            s1 = reference::plan_sequence_serial(chain, 0, 64, rollouts, 11);
            t.serial_s += omp_get_wtime() - t0;
            const double t1 = omp_get_wtime();
            s2 = plan_sequence(chain, 0, 64, rollouts, 11, jobs);
            t.parallel_s += omp_get_wtime() - t1;
        }
        if (s1.regions != s2.regions || s1.tv_cost != s2.tv_cost) {
            std::fprintf(stderr, "plan_sequence: serial and parallel results differ\n");
            return 1;
        }
        report("plan_sequence (20k rollouts)", t, jobs);
    }

    // --- SLEM benchmark trials -----------------------------------------------
    {
        const RegionGraph g = fig2_graph(false);
        Timing t;
        const int trials = 4;
        const double t0 = omp_get_wtime();
        const auto rows1 = run_slem_benchmark(g, trials, 3, 1);
        t.serial_s = omp_get_wtime() - t0;
        const double t1 = omp_get_wtime();
        const auto rows2 = run_slem_benchmark(g, trials, 3, jobs);
        t.parallel_s = omp_get_wtime() - t1;
        for (size_t i = 0; i < rows1.size(); ++i)
            if (rows1[i].slem != rows2[i].slem) {
                std::fprintf(stderr, "bench trials: serial and parallel rows differ\n");
                return 1;
            }
        report("bench-slem (4 trials)", t, jobs);
    }
    return 0;
}
