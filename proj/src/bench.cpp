#include "ergo/bench.hpp"

#include <omp.h>

#include <cmath>
#include <iterator>

#include "ergo/parallel.hpp"

namespace ergo {

TargetDistribution random_target(int n, std::uint64_t seed) {
    RandomStream rng(seed);
    Vector w(n);
    double sum = 0.0;
    do {
        sum = 0.0;
        for (double& wi : w) {
            wi = rng.uniform();
            sum += wi;
        }
    } while (sum <= 1e-9);
    for (double& wi : w) wi /= sum;
    // exact normalization can leave zero entries; the solvers floor them anyway
    return apply_weight_floor(TargetDistribution{std::move(w)});
}

std::vector<BenchRow> run_slem_benchmark(const RegionGraph& g, int trials, std::uint64_t seed,
                                         int jobs, bool timings,
                                         const SolverSettings& settings) {
    require_valid(g);
    constexpr int n_methods = static_cast<int>(std::size(kBenchMethods));
    std::vector<BenchRow> rows(static_cast<size_t>(trials) * n_methods);

    parallel_for(trials, jobs, [&](std::int64_t t) {
        const TargetDistribution w =
            random_target(g.node_count, derive_seed(seed, "bench-w", static_cast<std::uint64_t>(t)));
        for (int m = 0; m < n_methods; ++m) {
            SolverSettings s = settings;
            s.seed = derive_seed(seed, "bench-solver", static_cast<std::uint64_t>(t) * n_methods + m);
            const double start = timings ? omp_get_wtime() : 0.0;
            const ChainSolution sol = solve_with_method(kBenchMethods[m], g, w, s);
            BenchRow& row = rows[static_cast<size_t>(t) * n_methods + m];
            row.trial = static_cast<int>(t);
            row.method = kBenchMethods[m];
            row.slem = sol.slem;
            row.objective = sol.objective_value;
            row.wall_ms = timings ? (omp_get_wtime() - start) * 1e3 : 0.0;
        }
    });
    return rows;
}

std::vector<HistogramRow> slem_histogram(const std::vector<BenchRow>& rows, int bins) {
    std::vector<HistogramRow> out;
    for (Method m : kBenchMethods) {
        std::vector<int> counts(bins, 0);
        for (const BenchRow& r : rows) {
            if (r.method != m) continue;
            int b = static_cast<int>(r.slem * bins);
            b = std::min(std::max(b, 0), bins - 1);
            ++counts[b];
        }
        for (int b = 0; b < bins; ++b)
            out.push_back({m, static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins,
                           counts[b]});
    }
    return out;
}

std::vector<double> mean_slem_by_method(const std::vector<BenchRow>& rows) {
    constexpr int n_methods = static_cast<int>(std::size(kBenchMethods));
    std::vector<double> sum(n_methods, 0.0);
    std::vector<int> count(n_methods, 0);
    for (const BenchRow& r : rows) {
        for (int m = 0; m < n_methods; ++m)
            if (kBenchMethods[m] == r.method) {
                sum[m] += r.slem;
                ++count[m];
            }
    }
    for (int m = 0; m < n_methods; ++m) sum[m] = count[m] ? sum[m] / count[m] : 0.0;
    return sum;
}

}  // namespace ergo
