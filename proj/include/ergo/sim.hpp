#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ergo/chain.hpp"
#include "ergo/detector.hpp"
#include "ergo/graph.hpp"

namespace ergo {

// I-beam proportions used for every node structure. The anomalous cube sits
// flush on the outer web face. All constants are in the same length units as
// the detector threshold and the noise covariance.
namespace beam {
inline constexpr double length = 400.0;         // extrusion along x
inline constexpr double flange_width = 100.0;   // y extent of each flange
inline constexpr double web_height = 300.0;     // z extent between flanges
inline constexpr double web_half_thickness = 10.0;
}  // namespace beam

struct ScenarioConfig {
    RegionGraph graph = fig2_graph(true);
    std::string graph_name = "fig2-directed";
    int structure_points_per_node = 500;
    int anomaly_points = 250;
    double anomaly_size = 100.0;
    double anomaly_prob_lo = 0.25;
    double anomaly_prob_hi = 0.75;
    Matrix noise_cov;  // defaults to diag(40, 40, 40)
    double prior_perturb_sigma = 0.2;
    int steps = 20;
    int observations_per_visit = 250;
    DetectorConfig detector;  // epsilon 20, c 0.5, k 5, 3D
    int horizon_K = 10;
    int rollouts = 256;
    int trials = 500;
    std::uint64_t seed = 0;

    ScenarioConfig();
};

ScenarioConfig scenario_config_from_json(const std::string& text);
ScenarioConfig load_scenario_config(const std::string& path);

struct NodeScenario {
    std::vector<ReferencePoint> reference;  // nominal I-beam cloud with priors
    std::vector<Vector> true_surface;       // I-beam plus cube when anomalous
    bool anomalous = false;
    double assignment_prob = 0.0;
    double prior = 0.5;
    double cube_x0 = 0.0;  // beam coordinate of the cube corner when anomalous
};

struct Scenario {
    std::vector<NodeScenario> nodes;
};

enum class Policy { Random, GreedyMaxEntropy, EntropyErgodic };
const char* to_string(Policy p);
Policy policy_from_string(const std::string& name);

struct TrialRecord {
    std::vector<char> anomaly_labels;
    std::vector<double> belief_max;   // per-node max P(H1) over reference points
    std::vector<double> belief_mean;  // per-node mean P(H1), reported alongside
    std::vector<int> visit_sequence;  // starts at node 0, length <= steps + 1
    double bce_anomalous = 0.0;       // NaN when the trial drew no anomaly
    double bce_all = 0.0;
    double bce_anomalous_mean_conv = 0.0;
    double bce_all_mean_conv = 0.0;
};

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t trial_seed);

// One sensing pass at a node: observations_per_visit samples of the true
// surface corrupted by the noise covariance.
std::vector<ObservedPoint> observe_node(const Scenario& scenario, const ScenarioConfig& config,
                                        int node, RandomStream& rng);

// Per-(node, visit) observation stream; identical across policies so that the
// three policies face the same noise at matched visits.
RandomStream observation_stream(std::uint64_t trial_seed, int node, int visit_count);

TrialRecord run_policy_trial(const Scenario& scenario, const ScenarioConfig& config,
                             Policy policy, std::uint64_t trial_seed);

// Mean binary cross entropy of the node beliefs against the labels.
double bce_loss(const std::vector<double>& beliefs, const std::vector<char>& labels,
                bool anomalous_only);

struct PolicyStats {
    Policy policy;
    double mean_bce_anomalous = 0.0;
    double se_bce_anomalous = 0.0;
    int n_anomalous_trials = 0;
    double mean_bce_all = 0.0;
    double se_bce_all = 0.0;
    double mean_bce_anomalous_mean_conv = 0.0;
    double mean_bce_all_mean_conv = 0.0;
};

struct SimulationResult {
    std::vector<Policy> policies;
    // records[p][t] for policy p, trial t
    std::vector<std::vector<TrialRecord>> records;
    std::vector<PolicyStats> stats;
};

SimulationResult run_simulation(const ScenarioConfig& config, const std::vector<Policy>& policies,
                                int jobs = 1);

// Summary block in the shape of the result tables: one line per policy with
// mean +/- standard error.
std::string format_summary(const SimulationResult& result);

}  // namespace ergo
