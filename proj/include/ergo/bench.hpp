#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

struct BenchRow {
    int trial = 0;
    Method method = Method::MetropolisHastings;
    double slem = 0.0;
    double objective = 0.0;
    double wall_ms = 0.0;  // filled only when timing is requested
};

inline constexpr Method kBenchMethods[] = {
    Method::MetropolisHastings,
    Method::Fmrmc,
    Method::UpperBound,
    Method::ModifiedUpperBound,
};

// Random targets (uniform entries, normalized), all four methods per trial.
// Trial t draws its target from the substream (seed, "bench-w", t), so rows
// are identical for any job count. Wall times are measured only with
// timings=true; the default keeps fixed-seed runs byte-reproducible.
std::vector<BenchRow> run_slem_benchmark(const RegionGraph& g, int trials, std::uint64_t seed,
                                         int jobs = 1, bool timings = false,
                                         const SolverSettings& settings = {});

// Per-method SLEM histogram over [0, 1]; plot-ready counts.
struct HistogramRow {
    Method method;
    double lo, hi;
    int count;
};
std::vector<HistogramRow> slem_histogram(const std::vector<BenchRow>& rows, int bins = 50);

// mean SLEM per method, indexed like kBenchMethods
std::vector<double> mean_slem_by_method(const std::vector<BenchRow>& rows);

TargetDistribution random_target(int n, std::uint64_t seed);

}  // namespace ergo
