#include "ergo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ergo/parallel.hpp"
#include "ergo/sequencer.hpp"

namespace ergo {

using nlohmann::json;

ScenarioConfig::ScenarioConfig() {
    noise_cov = Matrix::diag({40.0, 40.0, 40.0});
    detector = DetectorConfig{20.0, 0.5, 5, 3};
}

const char* to_string(Policy p) {
    switch (p) {
        case Policy::Random: return "random";
        case Policy::GreedyMaxEntropy: return "greedy-max-entropy";
        case Policy::EntropyErgodic: return "entropy-ergodic";
    }
    return "?";
}

Policy policy_from_string(const std::string& name) {
    if (name == "random") return Policy::Random;
    if (name == "greedy" || name == "greedy-max-entropy") return Policy::GreedyMaxEntropy;
    if (name == "ergodic" || name == "entropy-ergodic") return Policy::EntropyErgodic;
    raise(ErrorCode::ParseError, "unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// scenario generation
// ---------------------------------------------------------------------------

namespace {

struct Plate {
    // point(u, v) = origin + u * du + v * dv, u/v in [0, 1]
    Vector origin, du, dv, normal;
    double area;
};

std::vector<Plate> ibeam_plates() {
    const double L = beam::length;
    const double hw = 0.5 * beam::flange_width;
    const double hz = 0.5 * beam::web_height;
    const double wy = beam::web_half_thickness;
    const double x0 = -0.5 * L;
    return {
        // top flange, bottom flange, outer web face (+y), inner web face (-y)
        {{x0, -hw, hz}, {L, 0, 0}, {0, 2 * hw, 0}, {0, 0, 1}, L * 2 * hw},
        {{x0, -hw, -hz}, {L, 0, 0}, {0, 2 * hw, 0}, {0, 0, -1}, L * 2 * hw},
        {{x0, wy, -hz}, {L, 0, 0}, {0, 0, 2 * hz}, {0, 1, 0}, L * 2 * hz},
        {{x0, -wy, -hz}, {L, 0, 0}, {0, 0, 2 * hz}, {0, -1, 0}, L * 2 * hz},
    };
}

std::vector<Plate> cube_plates(double x0, double size) {
    const double y0 = beam::web_half_thickness;  // flush on the outer web face
    const double z0 = -0.5 * size;
    const double s = size;
    return {
        {{x0, y0 + s, z0}, {s, 0, 0}, {0, 0, s}, {0, 1, 0}, s * s},   // outer face
        {{x0, y0, z0}, {0, s, 0}, {0, 0, s}, {-1, 0, 0}, s * s},      // -x side
        {{x0 + s, y0, z0}, {0, s, 0}, {0, 0, s}, {1, 0, 0}, s * s},   // +x side
        {{x0, y0, z0}, {s, 0, 0}, {0, s, 0}, {0, 0, -1}, s * s},      // bottom
        {{x0, y0, z0 + s}, {s, 0, 0}, {0, s, 0}, {0, 0, 1}, s * s},   // top
    };
}

// area-weighted uniform sample over a set of plates
std::pair<Vector, Vector> sample_plates(const std::vector<Plate>& plates, RandomStream& rng) {
    double total = 0.0;
    for (const Plate& p : plates) total += p.area;
    double pick = rng.uniform() * total;
    size_t idx = 0;
    for (; idx + 1 < plates.size(); ++idx) {
        if (pick < plates[idx].area) break;
        pick -= plates[idx].area;
    }
    const Plate& p = plates[idx];
    const double u = rng.uniform();
    const double v = rng.uniform();
    Vector pos(3);
    for (int i = 0; i < 3; ++i) pos[i] = p.origin[i] + u * p.du[i] + v * p.dv[i];
    return {pos, p.normal};
}

}  // namespace

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t trial_seed) {
    if (config.detector.dimension != 3)
        raise(ErrorCode::ValidationError, "the scenario geometry is 3D");
    Scenario scenario;
    scenario.nodes.resize(config.graph.node_count);
    const auto plates = ibeam_plates();

    for (int node = 0; node < config.graph.node_count; ++node) {
        RandomStream rng(derive_seed(trial_seed, "scenario", static_cast<std::uint64_t>(node)));
        NodeScenario& ns = scenario.nodes[node];

        ns.reference.resize(config.structure_points_per_node);
        ns.true_surface.reserve(config.structure_points_per_node + config.anomaly_points);
        for (int i = 0; i < config.structure_points_per_node; ++i) {
            auto [pos, normal] = sample_plates(plates, rng);
            ns.reference[i].position = pos;
            ns.reference[i].normal = normal;
            ns.true_surface.push_back(std::move(pos));
        }

        ns.assignment_prob = rng.uniform(config.anomaly_prob_lo, config.anomaly_prob_hi);
        ns.anomalous = rng.uniform() < ns.assignment_prob;
        if (ns.anomalous) {
            const double s = config.anomaly_size;
            const double x0 = rng.uniform(-0.5 * beam::length, 0.5 * beam::length - s);
            ns.cube_x0 = x0;
            // the cube occludes the patch of the outer web face it sits on;
            // the reference model keeps the nominal points
            std::erase_if(ns.true_surface, [&](const Vector& p) {
                return p[1] == beam::web_half_thickness && p[0] >= x0 && p[0] <= x0 + s &&
                       p[2] >= -0.5 * s && p[2] <= 0.5 * s;
            });
            const auto cplates = cube_plates(x0, s);
            for (int i = 0; i < config.anomaly_points; ++i)
                ns.true_surface.push_back(sample_plates(cplates, rng).first);
        }

        double prior = ns.assignment_prob;
        if (config.prior_perturb_sigma > 0.0) {
            do {
                prior = ns.assignment_prob + config.prior_perturb_sigma * rng.normal();
            } while (prior < 0.0 || prior > 1.0);
        }
        ns.prior = prior;
        const double p1 = std::clamp(prior, tol::belief_clamp, 1.0 - tol::belief_clamp);
        for (ReferencePoint& r : ns.reference) {
            r.belief_h1 = p1;
            r.belief_h0 = 1.0 - p1;
        }
    }
    return scenario;
}

RandomStream observation_stream(std::uint64_t trial_seed, int node, int visit_count) {
    const std::uint64_t node_seed =
        derive_seed(trial_seed, "observe-node", static_cast<std::uint64_t>(node));
    return RandomStream(derive_seed(node_seed, "visit", static_cast<std::uint64_t>(visit_count)));
}

std::vector<ObservedPoint> observe_node(const Scenario& scenario, const ScenarioConfig& config,
                                        int node, RandomStream& rng) {
    const NodeScenario& ns = scenario.nodes.at(node);
    std::vector<ObservedPoint> obs(config.observations_per_visit);
    for (ObservedPoint& o : obs) {
        const size_t idx = rng.uniform_index(ns.true_surface.size());
        o.position = sample_gaussian(ns.true_surface[idx], config.noise_cov, rng);
        o.covariance = config.noise_cov;
    }
    return obs;
}

// ---------------------------------------------------------------------------
// policies
// ---------------------------------------------------------------------------

namespace {

// per-node beliefs for the whole scenario
std::vector<std::vector<ReferencePoint>> initial_beliefs(const Scenario& scenario) {
    std::vector<std::vector<ReferencePoint>> refs;
    refs.reserve(scenario.nodes.size());
    for (const NodeScenario& ns : scenario.nodes) refs.push_back(ns.reference);
    return refs;
}

double node_belief_max(const std::vector<ReferencePoint>& refs) {
    double m = 0.0;
    for (const ReferencePoint& r : refs) m = std::max(m, r.belief_h1);
    return m;
}

double node_belief_mean(const std::vector<ReferencePoint>& refs) {
    double s = 0.0;
    for (const ReferencePoint& r : refs) s += r.belief_h1;
    return s / static_cast<double>(refs.size());
}

}  // namespace

double bce_loss(const std::vector<double>& beliefs, const std::vector<char>& labels,
                bool anomalous_only) {
    double sum = 0.0;
    int count = 0;
    for (size_t i = 0; i < beliefs.size(); ++i) {
        if (anomalous_only && !labels[i]) continue;
        const double p = std::clamp(beliefs[i], tol::belief_clamp, 1.0 - tol::belief_clamp);
        sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
        ++count;
    }
    if (count == 0) return std::numeric_limits<double>::quiet_NaN();
    return sum / count;
}

TrialRecord run_policy_trial(const Scenario& scenario, const ScenarioConfig& config,
                             Policy policy, std::uint64_t trial_seed) {
    const int n = config.graph.node_count;
    auto beliefs = initial_beliefs(scenario);
    const auto neighbors = config.graph.out_neighbors();

    std::vector<int> visit_count(n, 0);
    TrialRecord rec;
    rec.visit_sequence.reserve(config.steps + 1);

    RandomStream policy_rng(derive_seed(trial_seed, "policy-random"));
    std::deque<int> pending;  // remaining moves of the current ergodic sequence
    int replan_index = 0;

    int cur = 0;  // the robot starts at node 0
    auto arrive = [&](int node) {
        rec.visit_sequence.push_back(node);
        RandomStream rng = observation_stream(trial_seed, node, visit_count[node]);
        ++visit_count[node];
        const auto obs = observe_node(scenario, config, node, rng);
        process_observation_batch(beliefs[node], obs, config.detector);
    };
    arrive(cur);

    for (int step = 0; step < config.steps; ++step) {
        int next = cur;
        switch (policy) {
            case Policy::Random: {
                const auto& nb = neighbors[cur];
                if (!nb.empty()) next = nb[policy_rng.uniform_index(nb.size())];
                break;
            }
            case Policy::GreedyMaxEntropy: {
                const auto& nb = neighbors[cur];
                double best = -1.0;
                for (int cand : nb) {
                    const double h = region_entropy(beliefs[cand]);
                    if (h > best) {
                        best = h;
                        next = cand;
                    }
                }
                break;
            }
            case Policy::EntropyErgodic: {
                if (pending.empty()) {
                    if (config.horizon_K < 2)
                        raise(ErrorCode::ValidationError,
                              "the ergodic policy needs a horizon of at least 2");
                    Vector entropies(n);
                    for (int i = 0; i < n; ++i) entropies[i] = region_entropy(beliefs[i]);
                    const TargetDistribution w = weights_from_entropy(entropies);
                    SolverSettings settings;
                    settings.seed = derive_seed(trial_seed, "solver",
                                                static_cast<std::uint64_t>(replan_index));
                    const ChainSolution chain =
                        optimize_modified_upper_bound(config.graph, w, settings);
                    const Sequence seq = plan_sequence(
                        chain, cur, config.horizon_K, config.rollouts,
                        derive_seed(trial_seed, "plan", static_cast<std::uint64_t>(replan_index)));
                    ++replan_index;
                    pending.assign(seq.regions.begin() + 1, seq.regions.end());
                }
                next = pending.front();
                pending.pop_front();
                break;
            }
        }
        cur = next;
        arrive(cur);
    }

    rec.anomaly_labels.resize(n);
    rec.belief_max.resize(n);
    rec.belief_mean.resize(n);
    for (int i = 0; i < n; ++i) {
        rec.anomaly_labels[i] = scenario.nodes[i].anomalous ? 1 : 0;
        rec.belief_max[i] = node_belief_max(beliefs[i]);
        rec.belief_mean[i] = node_belief_mean(beliefs[i]);
    }
    rec.bce_anomalous = bce_loss(rec.belief_max, rec.anomaly_labels, true);
    rec.bce_all = bce_loss(rec.belief_max, rec.anomaly_labels, false);
    rec.bce_anomalous_mean_conv = bce_loss(rec.belief_mean, rec.anomaly_labels, true);
    rec.bce_all_mean_conv = bce_loss(rec.belief_mean, rec.anomaly_labels, false);
    return rec;
}

// ---------------------------------------------------------------------------
// batch runner
// ---------------------------------------------------------------------------

namespace {

void accumulate(const std::vector<double>& values, double& mean, double& se, int& n_out) {
    double sum = 0.0;
    int n = 0;
    for (double v : values)
        if (!std::isnan(v)) {
            sum += v;
            ++n;
        }
    mean = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    double var = 0.0;
    for (double v : values)
        if (!std::isnan(v)) var += (v - mean) * (v - mean);
    se = n > 1 ? std::sqrt(var / (n - 1)) / std::sqrt(static_cast<double>(n)) : 0.0;
    n_out = n;
}

}  // namespace

SimulationResult run_simulation(const ScenarioConfig& config, const std::vector<Policy>& policies,
                                int jobs) {
    require_valid(config.graph);
    SimulationResult result;
    result.policies = policies;
    result.records.assign(policies.size(), std::vector<TrialRecord>(config.trials));

    parallel_for(config.trials, jobs, [&](std::int64_t t) {
        const std::uint64_t trial_seed =
            derive_seed(config.seed, "trial", static_cast<std::uint64_t>(t));
        const Scenario scenario = generate_scenario(config, trial_seed);
        for (size_t p = 0; p < policies.size(); ++p)
            result.records[p][t] = run_policy_trial(scenario, config, policies[p], trial_seed);
    });

    for (size_t p = 0; p < policies.size(); ++p) {
        PolicyStats st;
        st.policy = policies[p];
        std::vector<double> anom, all, anom_mc, all_mc;
        for (const TrialRecord& r : result.records[p]) {
            anom.push_back(r.bce_anomalous);
            all.push_back(r.bce_all);
            anom_mc.push_back(r.bce_anomalous_mean_conv);
            all_mc.push_back(r.bce_all_mean_conv);
        }
        int n_all = 0;
        accumulate(anom, st.mean_bce_anomalous, st.se_bce_anomalous, st.n_anomalous_trials);
        accumulate(all, st.mean_bce_all, st.se_bce_all, n_all);
        double se_dummy;
        int n_dummy;
        accumulate(anom_mc, st.mean_bce_anomalous_mean_conv, se_dummy, n_dummy);
        accumulate(all_mc, st.mean_bce_all_mean_conv, se_dummy, n_dummy);
        result.stats.push_back(st);
    }
    return result;
}

std::string format_summary(const SimulationResult& result) {
    std::ostringstream out;
    out << "BCE loss (anomalous nodes):\n";
    for (const PolicyStats& st : result.stats) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-20s %.3f +/- %.3f   (mean-convention %.3f, n=%d)\n",
                      to_string(st.policy), st.mean_bce_anomalous, st.se_bce_anomalous,
                      st.mean_bce_anomalous_mean_conv, st.n_anomalous_trials);
        out << buf;
    }
    out << "BCE loss (all nodes):\n";
    for (const PolicyStats& st : result.stats) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-20s %.3f +/- %.3f   (mean-convention %.3f)\n",
                      to_string(st.policy), st.mean_bce_all, st.se_bce_all,
                      st.mean_bce_all_mean_conv);
        out << buf;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

ScenarioConfig scenario_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
    ScenarioConfig c;
    try {
        if (j.contains("graph")) {
            if (j.at("graph").is_string()) {
                c.graph_name = j.at("graph").get<std::string>();
                c.graph = resolve_graph(c.graph_name);
            } else {
                c.graph = graph_from_json(j.at("graph").dump());
                c.graph_name = "(inline)";
            }
        }
        c.structure_points_per_node = j.value("structure_points_per_node", c.structure_points_per_node);
        c.anomaly_points = j.value("anomaly_points", c.anomaly_points);
        c.anomaly_size = j.value("anomaly_size", c.anomaly_size);
        if (j.contains("anomaly_prob_range")) {
            c.anomaly_prob_lo = j.at("anomaly_prob_range").at(0).get<double>();
            c.anomaly_prob_hi = j.at("anomaly_prob_range").at(1).get<double>();
        }
        if (j.contains("noise_cov")) {
            const auto& nc = j.at("noise_cov");
            if (nc.is_array() && !nc.empty() && nc[0].is_array()) {
                c.noise_cov = Matrix(3, 3);
                for (int i = 0; i < 3; ++i)
                    for (int k = 0; k < 3; ++k) c.noise_cov(i, k) = nc[i][k].get<double>();
            } else {
                c.noise_cov = Matrix::diag(nc.get<Vector>());
            }
        }
        c.prior_perturb_sigma = j.value("prior_perturb_sigma", c.prior_perturb_sigma);
        c.steps = j.value("steps", c.steps);
        c.observations_per_visit = j.value("observations_per_visit", c.observations_per_visit);
        if (j.contains("detector")) {
            const auto& d = j.at("detector");
            c.detector.epsilon = d.value("epsilon", c.detector.epsilon);
            c.detector.smoothing_c = d.value("smoothing_c", c.detector.smoothing_c);
            c.detector.neighborhood_k = d.value("neighborhood_k", c.detector.neighborhood_k);
            c.detector.dimension = d.value("dimension", c.detector.dimension);
        }
        c.horizon_K = j.value("horizon_K", c.horizon_K);
        c.rollouts = j.value("rollouts", c.rollouts);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
    if (c.trials < 1 || c.steps < 0 || c.structure_points_per_node < 1 ||
        c.observations_per_visit < 1)
        raise(ErrorCode::ValidationError, "scenario counts must be positive");
    if (c.anomaly_prob_lo < 0.0 || c.anomaly_prob_hi > 1.0 ||
        c.anomaly_prob_lo > c.anomaly_prob_hi)
        raise(ErrorCode::ValidationError, "anomaly probability range must sit inside [0,1]");
    return c;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ParseError, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_config_from_json(ss.str());
}

}  // namespace ergo
