#include "ergo/sequencer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ergo/parallel.hpp"

namespace ergo {

using nlohmann::json;

double tv_distance(const Vector& freq, const TargetDistribution& w) {
    if (freq.size() != w.weights.size())
        raise(ErrorCode::ValidationError, "tv_distance dimension mismatch");
    double sf = 0.0;
    for (double f : freq) sf += f;
    if (std::fabs(sf - 1.0) > 1e-9)
        raise(ErrorCode::ValidationError, "frequencies must sum to 1");
    double s = 0.0;
    for (size_t i = 0; i < freq.size(); ++i) s += std::fabs(freq[i] - w.weights[i]);
    return 0.5 * s;
}

namespace {

int sample_column(const Matrix& P, int j, double u) {
    // inverse CDF walk down column j; u in [0, 1)
    const int n = P.rows;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += P(i, j);
        if (u < acc) return i;
    }
    // numerical remainder: return the last state with positive probability
    for (int i = n - 1; i >= 0; --i)
        if (P(i, j) > 0.0) return i;
    return n - 1;
}

}  // namespace

Sequence rollout(const ChainSolution& chain, int start, int horizon, RandomStream& rng) {
    const int n = chain.transition.rows;
    if (horizon < 1) raise(ErrorCode::ValidationError, "horizon must be at least 1");
    if (start < 0 || start >= n) raise(ErrorCode::ValidationError, "start node out of range");
    Sequence s;
    s.horizon = horizon;
    s.regions.resize(horizon);
    s.regions[0] = start;
    int cur = start;
    for (int k = 1; k < horizon; ++k) {
        cur = sample_column(chain.transition, cur, rng.uniform());
        s.regions[k] = cur;
    }
    std::vector<int> counts(n, 0);
    for (int r : s.regions) ++counts[r];
    Vector freq(n);
    for (int i = 0; i < n; ++i) freq[i] = static_cast<double>(counts[i]) / horizon;
    s.tv_cost = tv_distance(freq, chain.target);
    return s;
}

namespace {

Sequence plan_impl(const ChainSolution& chain, int start, int horizon, int n_rollouts,
                   std::uint64_t seed, int jobs) {
    if (n_rollouts < 1) raise(ErrorCode::ValidationError, "need at least one rollout");
    std::vector<Sequence> all(n_rollouts);
    parallel_for(n_rollouts, jobs, [&](std::int64_t r) {
        RandomStream rng(derive_seed(seed, "rollout", static_cast<std::uint64_t>(r)));
        all[r] = rollout(chain, start, horizon, rng);
    });
    int best = 0;
    for (int r = 1; r < n_rollouts; ++r)
        if (all[r].tv_cost < all[best].tv_cost) best = r;
    return all[best];
}

}  // namespace

Sequence plan_sequence(const ChainSolution& chain, int start, int horizon, int n_rollouts,
                       std::uint64_t seed, int jobs) {
    return plan_impl(chain, start, horizon, n_rollouts, seed, jobs);
}

namespace reference {

Sequence plan_sequence_serial(const ChainSolution& chain, int start, int horizon, int n_rollouts,
                              std::uint64_t seed) {
    return plan_impl(chain, start, horizon, n_rollouts, seed, 1);
}

}  // namespace reference

std::string sequence_to_json(const Sequence& s, const std::string& manifest) {
    json j{{"start", s.regions.empty() ? 0 : s.regions.front()},
           {"K", s.horizon},
           {"regions", s.regions},
           {"tv_cost", s.tv_cost}};
    if (!manifest.empty()) j["manifest"] = manifest;
    return j.dump(2) + "\n";
}

Sequence sequence_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
    try {
        Sequence s;
        s.horizon = j.at("K").get<int>();
        s.regions = j.at("regions").get<std::vector<int>>();
        s.tv_cost = j.at("tv_cost").get<double>();
        return s;
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
}

void save_sequence(const Sequence& s, const std::string& path, const std::string& manifest) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::ValidationError, "cannot write sequence file " + path);
    out << sequence_to_json(s, manifest);
}

Sequence load_sequence(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ParseError, "cannot open sequence file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return sequence_from_json(ss.str());
}

}  // namespace ergo
