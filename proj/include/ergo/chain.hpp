#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ergo/graph.hpp"
#include "ergo/linalg.hpp"

namespace ergo {

enum class Method {
    MetropolisHastings,
    Fmrmc,
    UpperBound,
    ModifiedUpperBound,
};

const char* to_string(Method m);
Method method_from_string(const std::string& name);  // throws ParseError

// Transition matrices are column stochastic: transition(i, j) is the
// probability of moving to i given the walker is at j, so stationarity reads
// P w = w and the sparsity pattern of column j is the out-edge set of node j.
struct ChainSolution {
    Matrix transition;
    TargetDistribution target;
    double slem = 0.0;
    Method method = Method::MetropolisHastings;
    double objective_value = 0.0;
    // FMRMC on directed graphs: edges zeroed because their reverse is absent
    std::vector<std::pair<int, int>> removed_edges;
};

struct SolverSettings {
    int max_iterations = 50000;
    double tolerance = 1e-6;
    std::string step_schedule = "adaptive-rho";  // or "fixed-rho"
    int restarts = 1;
    std::uint64_t seed = 0;
};

// Baseline chain: uniform proposals over out-neighbors, Metropolis acceptance.
// One-way edges always reject (reverse proposal probability is zero); throws
// NotApplicable if that leaves the chain disconnected.
ChainSolution metropolis_hastings(const RegionGraph& g, const TargetDistribution& target);

// P - w 1^T. Throws StationarityViolated when |Pw - w|_inf > tol::stationarity.
Matrix deflate(const Matrix& P, const TargetDistribution& target);

// Largest eigenvalue modulus of the deflated matrix.
double slem_of(const Matrix& P, const TargetDistribution& target);

// min |P - w 1^T|_2 over column-stochastic P with stationary w and the graph
// sparsity pattern.
ChainSolution optimize_upper_bound(const RegionGraph& g, const TargetDistribution& target,
                                   const SolverSettings& settings = {});

// min |W^-1/2 P W^1/2 - q q^T|_2 under detailed balance P W = W P^T; exact
// SLEM minimization over reversible chains. Edges whose reverse is missing
// are forced to zero; throws Infeasible if that disconnects the graph.
ChainSolution optimize_fmrmc(const RegionGraph& g, const TargetDistribution& target,
                             const SolverSettings& settings = {});

// Same similarity-transformed objective without the reversibility constraint.
ChainSolution optimize_modified_upper_bound(const RegionGraph& g, const TargetDistribution& target,
                                            const SolverSettings& settings = {});

ChainSolution solve_with_method(Method m, const RegionGraph& g, const TargetDistribution& target,
                                const SolverSettings& settings = {});

// Recomputes every ChainSolution type invariant; throws ValidationError with
// a description on the first violation. Used by tests and the CLI.
void verify_solution(const ChainSolution& sol, const RegionGraph& g);

// --- serialization -----------------------------------------------------------

std::string solution_to_json(const ChainSolution& sol, const std::string& manifest = "");
ChainSolution solution_from_json(const std::string& text);
ChainSolution load_solution(const std::string& path);
void save_solution(const ChainSolution& sol, const std::string& path,
                   const std::string& manifest = "");

}  // namespace ergo
