#include "ergo/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ergo {

using nlohmann::json;

bool RegionGraph::has_edge(int from, int to) const {
    if (from == to) return allow_self_loops;
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(from, to));
}

std::vector<std::vector<int>> RegionGraph::out_neighbors() const {
    std::vector<std::vector<int>> adj(node_count);
    for (const auto& [u, v] : edges) adj[u].push_back(v);
    return adj;
}

std::vector<std::vector<int>> RegionGraph::in_neighbors() const {
    std::vector<std::vector<int>> adj(node_count);
    for (const auto& [u, v] : edges) adj[v].push_back(u);
    return adj;
}

RegionGraph RegionGraph::skeleton() const {
    RegionGraph s = *this;
    std::set<std::pair<int, int>> es(edges.begin(), edges.end());
    for (const auto& [u, v] : edges) es.insert({v, u});
    s.edges.assign(es.begin(), es.end());
    return s;
}

RegionGraph make_graph(int node_count, std::vector<std::pair<int, int>> directed_edges,
                       std::vector<std::pair<int, int>> undirected_edges, bool allow_self_loops,
                       std::vector<std::string> node_labels) {
    if (node_count < 1) raise(ErrorCode::ValidationError, "graph needs at least one node");
    std::set<std::pair<int, int>> es;
    auto add = [&](int u, int v) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count)
            raise(ErrorCode::ValidationError, "edge endpoint out of range");
        if (u == v)
            raise(ErrorCode::ValidationError, "explicit self loop; use the self_loops flag");
        if (!es.insert({u, v}).second)
            raise(ErrorCode::ValidationError, "duplicate edge (" + std::to_string(u) + "," +
                                                  std::to_string(v) + ")");
    };
    for (const auto& [u, v] : directed_edges) add(u, v);
    for (const auto& [u, v] : undirected_edges) {
        add(u, v);
        add(v, u);
    }
    if (!node_labels.empty() && static_cast<int>(node_labels.size()) != node_count)
        raise(ErrorCode::ValidationError, "label count does not match node count");
    RegionGraph g;
    g.node_count = node_count;
    g.edges.assign(es.begin(), es.end());
    g.allow_self_loops = allow_self_loops;
    g.node_labels = std::move(node_labels);
    return g;
}

TargetDistribution make_target(Vector weights) {
    if (weights.empty()) raise(ErrorCode::ValidationError, "empty target distribution");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) raise(ErrorCode::ValidationError, "target weights must be positive");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        raise(ErrorCode::ValidationError, "target weights must sum to 1");
    return TargetDistribution{std::move(weights)};
}

namespace {

// reachability over an explicit adjacency list
std::vector<char> reachable(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<char> seen(adj.size(), 0);
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                q.push(v);
            }
    }
    return seen;
}

}  // namespace

GraphDiagnostics validate_graph(const RegionGraph& g) {
    GraphDiagnostics d;
    auto adj = g.out_neighbors();
    auto radj = g.in_neighbors();
    if (g.allow_self_loops) {
        for (int i = 0; i < g.node_count; ++i) {
            adj[i].push_back(i);
            radj[i].push_back(i);
        }
    }
    const auto fwd = reachable(adj, 0);
    const auto bwd = reachable(radj, 0);
    d.irreducible = true;
    for (int i = 0; i < g.node_count; ++i) {
        if (!fwd[i] || !bwd[i]) {
            d.irreducible = false;
            d.detail = "node " + std::to_string(i) + " not on a cycle through node 0";
            break;
        }
    }
    if (!d.irreducible) return d;

    // period = gcd over edges (u,v) of level[u] + 1 - level[v], BFS levels
    std::vector<int> level(g.node_count, -1);
    std::queue<int> q;
    q.push(0);
    level[0] = 0;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (level[v] < 0) {
                level[v] = level[u] + 1;
                q.push(v);
            }
    }
    int gcd = 0;
    for (int u = 0; u < g.node_count; ++u)
        for (int v : adj[u]) gcd = std::gcd(gcd, std::abs(level[u] + 1 - level[v]));
    d.period = gcd;  // 0 means no cycle at all (single node without a self loop)
    d.aperiodic = gcd == 1;
    if (!d.aperiodic) d.detail = gcd == 0 ? "no cycles" : "period " + std::to_string(gcd);
    return d;
}

void require_valid(const RegionGraph& g) {
    const GraphDiagnostics d = validate_graph(g);
    if (!d.irreducible) raise(ErrorCode::NotIrreducible, d.detail);
    if (!d.aperiodic) raise(ErrorCode::Periodic, d.detail);
}

TargetDistribution weights_from_entropy(const Vector& entropies) {
    if (entropies.empty()) raise(ErrorCode::EmptyStructure, "no entropies given");
    double sum = 0.0;
    for (double h : entropies) {
        if (h < 0.0) raise(ErrorCode::ValidationError, "negative entropy");
        sum += h;
    }
    Vector w(entropies.size());
    if (sum <= 1e-12) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    } else {
        for (size_t i = 0; i < w.size(); ++i) w[i] = entropies[i] / sum;
        // renormalize exactly to absorb rounding, floor zero entries
        bool floored = false;
        for (double& wi : w)
            if (wi < tol::weight_floor) {
                wi = tol::weight_floor;
                floored = true;
            }
        if (floored) {
            double s = std::accumulate(w.begin(), w.end(), 0.0);
            for (double& wi : w) wi /= s;
        }
    }
    return TargetDistribution{std::move(w)};
}

TargetDistribution apply_weight_floor(const TargetDistribution& t) {
    Vector w = t.weights;
    bool floored = false;
    for (double& wi : w)
        if (wi < tol::weight_floor) {
            wi = tol::weight_floor;
            floored = true;
        }
    if (floored) {
        const double s = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& wi : w) wi /= s;
    }
    return TargetDistribution{std::move(w)};
}

// ---------------------------------------------------------------------------
// file format
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<int, int>> parse_edge_list(const json& j, const char* key) {
    std::vector<std::pair<int, int>> out;
    if (!j.contains(key)) return out;
    for (const auto& e : j.at(key)) {
        if (!e.is_array() || e.size() != 2)
            raise(ErrorCode::ParseError, std::string(key) + " entries must be [i, j] pairs");
        out.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return out;
}

}  // namespace

RegionGraph graph_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
    try {
        const int nodes = j.at("nodes").get<int>();
        const bool self_loops = j.value("self_loops", true);
        std::vector<std::string> labels;
        if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
        return make_graph(nodes, parse_edge_list(j, "edges"), parse_edge_list(j, "undirected_edges"),
                          self_loops, std::move(labels));
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
}

RegionGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ParseError, "cannot open graph file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return graph_from_json(ss.str());
}

std::string graph_to_json(const RegionGraph& g) {
    // split edges into mutual pairs and one-way edges for readability
    std::set<std::pair<int, int>> es(g.edges.begin(), g.edges.end());
    json undirected = json::array();
    json directed = json::array();
    for (const auto& [u, v] : g.edges) {
        if (u < v && es.count({v, u})) {
            undirected.push_back({u, v});
        } else if (!es.count({v, u})) {
            directed.push_back({u, v});
        }
    }
    json j{{"nodes", g.node_count},
           {"self_loops", g.allow_self_loops},
           {"edges", directed},
           {"undirected_edges", undirected}};
    if (!g.node_labels.empty()) j["labels"] = g.node_labels;
    return j.dump(2) + "\n";
}

void save_graph(const RegionGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::ValidationError, "cannot write graph file " + path);
    out << graph_to_json(g);
}

// ---------------------------------------------------------------------------
// benchmark graph
// ---------------------------------------------------------------------------

RegionGraph fig2_graph(bool directed, bool allow_self_loops) {
    // Nine regions laid out on a 3x3 footprint with two extra diagonal
    // passages through the center (keeps the no-self-loop variant aperiodic).
    const std::vector<std::pair<int, int>> base = {
        {0, 1}, {1, 2}, {0, 3}, {2, 5}, {3, 4}, {4, 5},
        {3, 6}, {5, 8}, {7, 8}, {4, 7}, {0, 4}, {4, 8},
    };
    std::vector<std::pair<int, int>> undirected = base;
    std::vector<std::pair<int, int>> one_way;
    if (directed) {
        one_way = {{1, 4}, {6, 7}};
    } else {
        undirected.push_back({1, 4});
        undirected.push_back({6, 7});
    }
    return make_graph(9, one_way, undirected, allow_self_loops);
}

RegionGraph resolve_graph(const std::string& name_or_path) {
    if (name_or_path == "fig2-directed") return fig2_graph(true);
    if (name_or_path == "fig2-undirected") return fig2_graph(false);
    return load_graph(name_or_path);
}

}  // namespace ergo
