#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ergo/linalg.hpp"

namespace ergo {

// Directed graph of inspection regions. Edges are ordered (from, to) pairs;
// self loops are not stored explicitly but the allow_self_loops flag makes
// every (i, i) part of the optimization edge set.
struct RegionGraph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;  // sorted, unique, no (i, i)
    bool allow_self_loops = true;
    std::vector<std::string> node_labels;    // optional, empty or node_count entries

    bool has_edge(int from, int to) const;
    std::vector<std::vector<int>> out_neighbors() const;  // excludes self loops
    std::vector<std::vector<int>> in_neighbors() const;

    // Undirected closure: every edge present in both directions.
    RegionGraph skeleton() const;
};

// Validated construction; enforces the type invariants.
RegionGraph make_graph(int node_count, std::vector<std::pair<int, int>> directed_edges,
                       std::vector<std::pair<int, int>> undirected_edges, bool allow_self_loops,
                       std::vector<std::string> node_labels = {});

struct TargetDistribution {
    Vector weights;
};

// Checked constructor: entries > 0, sum within 1e-9 of 1.
TargetDistribution make_target(Vector weights);

struct GraphDiagnostics {
    bool irreducible = false;
    bool aperiodic = false;
    int period = 0;  // gcd of cycle lengths when irreducible, 0 otherwise
    std::string detail;
    bool valid() const { return irreducible && aperiodic; }
};

// Strong connectivity and aperiodicity of the transition structure
// (self loops included when the graph allows them).
GraphDiagnostics validate_graph(const RegionGraph& g);

// Throws NotIrreducible / Periodic; called by the chain optimizers.
void require_valid(const RegionGraph& g);

// w_i = h_i / sum_j h_j; all-zero entropies fall back to uniform.
TargetDistribution weights_from_entropy(const Vector& entropies);

// Entries below tol::weight_floor are raised and the vector renormalized;
// a zero stationary weight would contradict irreducibility.
TargetDistribution apply_weight_floor(const TargetDistribution& w);

// --- file format ------------------------------------------------------------
// {"nodes": N, "self_loops": bool, "edges": [[i,j],...],
//  "undirected_edges": [[i,j],...]}  (undirected pairs expand both ways)

RegionGraph load_graph(const std::string& path);
void save_graph(const RegionGraph& g, const std::string& path);
std::string graph_to_json(const RegionGraph& g);
RegionGraph graph_from_json(const std::string& text);

// Benchmark graph: 9 regions of a tank-like workspace, edges 1->4 and 6->7
// one-way in the directed variant. Single source of truth for the benchmarks;
// the files under assets/ are exports of these.
RegionGraph fig2_graph(bool directed, bool allow_self_loops = true);

// Resolves "fig2-directed" / "fig2-undirected" builtins, else loads a file.
RegionGraph resolve_graph(const std::string& name_or_path);

}  // namespace ergo
