#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

struct Sequence {
    std::vector<int> regions;  // length K, regions[0] is the start node
    int horizon = 0;
    double tv_cost = 0.0;
};

// (1/2) sum_i |freq_i - w_i|; both arguments must sum to 1.
double tv_distance(const Vector& freq, const TargetDistribution& w);

// Samples K-1 chain transitions from `start` and scores the visit
// frequencies of the whole sequence against the target.
Sequence rollout(const ChainSolution& chain, int start, int horizon, RandomStream& rng);

// Best of n_rollouts independent rollouts (lowest tv_cost, ties to the
// earliest rollout). Rollout r uses the substream (seed, "rollout", r), so
// the result is identical for any job count.
Sequence plan_sequence(const ChainSolution& chain, int start, int horizon, int n_rollouts,
                       std::uint64_t seed, int jobs = 1);

namespace reference {
// Serial twin of plan_sequence kept for testing and benchmarking.
Sequence plan_sequence_serial(const ChainSolution& chain, int start, int horizon, int n_rollouts,
                              std::uint64_t seed);
}  // namespace reference

std::string sequence_to_json(const Sequence& s, const std::string& manifest = "");
Sequence sequence_from_json(const std::string& text);
void save_sequence(const Sequence& s, const std::string& path, const std::string& manifest = "");
Sequence load_sequence(const std::string& path);

}  // namespace ergo
