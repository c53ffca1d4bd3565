#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ergo/bench.hpp"
#include "ergo/chain.hpp"
#include "support/grid_oracle.hpp"

using namespace ergo;

namespace {

RegionGraph complete_graph(int n, bool loops = true) {
    std::vector<std::pair<int, int>> und;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) und.push_back({i, j});
    return make_graph(n, {}, und, loops);
}

RegionGraph path3(bool loops) { return make_graph(3, {}, {{0, 1}, {1, 2}}, loops); }

Vector stationary_of(const Matrix& P) {
    // replace the last balance row with the normalization sum(w) = 1
    const int n = P.rows;
    Matrix A(n, n);
    Vector b(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = P(i, j) - (i == j ? 1.0 : 0.0);
    for (int j = 0; j < n; ++j) A(n - 1, j) = 1.0;
    b[n - 1] = 1.0;
    return solve_linear(A, b);
}

double chain_tv_after_walk(const ChainSolution& sol, int steps, std::uint64_t seed) {
    RandomStream rng(seed);
    const int n = sol.transition.rows;
    Vector counts(n, 0.0);
    int cur = 0;
    for (int s = 0; s < steps; ++s) {
        counts[cur] += 1.0;
        const double u = rng.uniform();
        double acc = 0.0;
        int next = n - 1;
        for (int i = 0; i < n; ++i) {
            acc += sol.transition(i, cur);
            if (u < acc) {
                next = i;
                break;
            }
        }
        cur = next;
    }
    double tv = 0.0;
    for (int i = 0; i < n; ++i) tv += std::fabs(counts[i] / steps - sol.target.weights[i]);
    return 0.5 * tv;
}

}  // namespace

TEST_CASE("metropolis-hastings on K3 with uniform target is doubly stochastic") {
    const RegionGraph g = complete_graph(3);
    const ChainSolution sol = metropolis_hastings(g, make_target({1.0 / 3, 1.0 / 3, 1.0 / 3}));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(sol.transition(i, j) == doctest::Approx(1.0 / 3));
    verify_solution(sol, g);
}

TEST_CASE("metropolis-hastings satisfies detailed balance on the 2-node graph") {
    const RegionGraph g = make_graph(2, {}, {{0, 1}}, true);
    const ChainSolution sol = metropolis_hastings(g, make_target({2.0 / 3, 1.0 / 3}));
    const Matrix& P = sol.transition;
    CHECK(std::fabs(P(1, 0) * (2.0 / 3) - P(0, 1) * (1.0 / 3)) <= 1e-9);
    CHECK(P(1, 0) == doctest::Approx(0.25));
    CHECK(P(0, 1) == doctest::Approx(0.5));
    verify_solution(sol, g);
}

TEST_CASE("metropolis-hastings needs a connected two-way subgraph") {
    // pure directed 3-cycle: every proposal is always rejected
    const RegionGraph g = make_graph(3, {{0, 1}, {1, 2}, {2, 0}}, {}, true);
    CHECK_THROWS_AS((void)metropolis_hastings(g, make_target({0.4, 0.3, 0.3})), Error);
}

TEST_CASE("deflation of a rank-one chain is the zero matrix") {
    const Vector w{0.5, 0.3, 0.2};
    Matrix P(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) P(i, j) = w[i];
    const TargetDistribution t = make_target(w);
    CHECK(max_abs(deflate(P, t)) <= 1e-15);
    CHECK(slem_of(P, t) <= 1e-12);
}

TEST_CASE("deflation of the identity keeps the other unit eigenvalues") {
    const TargetDistribution t = make_target({0.25, 0.25, 0.25, 0.25});
    const Vector m = eigenvalue_moduli(deflate(Matrix::identity(4), t));
    CHECK(m[0] == doctest::Approx(1.0));
    CHECK(m[1] == doctest::Approx(1.0));
    CHECK(m[2] == doctest::Approx(1.0));
    CHECK(m[3] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("deflation replaces exactly one unit eigenvalue on random chains") {
    RandomStream rng(17);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 4;
        Matrix P(n, n);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                P(i, j) = rng.uniform(0.05, 1.0);
                s += P(i, j);
            }
            for (int i = 0; i < n; ++i) P(i, j) /= s;
        }
        const Vector w = stationary_of(P);
        const TargetDistribution t = make_target([&] {
            Vector ww = w;
            double s = 0.0;
            for (double v : ww) s += v;
            for (double& v : ww) v /= s;
            return ww;
        }());
        Vector orig = eigenvalue_moduli(P);
        // drop the leading unit eigenvalue, append zero, re-sort
        orig.erase(orig.begin());
        orig.push_back(0.0);
        std::sort(orig.begin(), orig.end(), std::greater<double>());
        const Vector defl = eigenvalue_moduli(deflate(P, t));
        for (int i = 0; i < n; ++i) CHECK(defl[i] == doctest::Approx(orig[i]).epsilon(1e-7));
    }
}

TEST_CASE("2-node chain slem matches the closed form |1 - a - b|") {
    for (auto [a, b] : std::vector<std::pair<double, double>>{{0.3, 0.5}, {0.9, 0.8}, {0.2, 0.2}}) {
        Matrix P(2, 2);
        P(0, 0) = 1 - a;
        P(0, 1) = b;
        P(1, 0) = a;
        P(1, 1) = 1 - b;
        const Vector w{b / (a + b), a / (a + b)};
        CHECK(slem_of(P, make_target(w)) == doctest::Approx(std::fabs(1 - a - b)).epsilon(1e-10));
    }
}

TEST_CASE("upper-bound method on a complete graph reaches the rank-one chain") {
    const RegionGraph g = complete_graph(4);
    const TargetDistribution w = random_target(4, 5);
    const ChainSolution sol = optimize_upper_bound(g, w);
    verify_solution(sol, g);
    CHECK(sol.objective_value <= 1e-6);
    CHECK(sol.slem <= 1e-6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(sol.transition(i, j) == doctest::Approx(sol.target.weights[i]).epsilon(1e-5));
}

TEST_CASE("fmrmc on a complete graph with uniform target mixes instantly") {
    const RegionGraph g = complete_graph(5);
    const ChainSolution sol = optimize_fmrmc(g, make_target(Vector(5, 0.2)));
    verify_solution(sol, g);
    CHECK(sol.slem <= 1e-6);
}

TEST_CASE("optimizer objectives match the grid oracle on 3-node graphs") {
    const TargetDistribution uniform = make_target(Vector(3, 1.0 / 3));
    for (Method m : {Method::UpperBound, Method::ModifiedUpperBound, Method::Fmrmc}) {
        const RegionGraph g = path3(true);
        const ChainSolution sol = solve_with_method(m, g, uniform);
        verify_solution(sol, g);
        const double oracle_obj = grid_oracle::best_objective(m, g, uniform);
        CHECK(sol.objective_value <= oracle_obj + 1e-3);
        CHECK(sol.objective_value >= oracle_obj - 1e-3);
    }
}

TEST_CASE("adding an edge never hurts the oracle optimum") {
    const TargetDistribution w = random_target(3, 11);
    for (Method m : {Method::UpperBound, Method::ModifiedUpperBound, Method::Fmrmc}) {
        const double path_obj = grid_oracle::best_objective(m, path3(true), w);
        const double tri_obj = grid_oracle::best_objective(m, complete_graph(3), w);
        CHECK(tri_obj <= path_obj + 1e-6);
    }
}

TEST_CASE("fmrmc solutions satisfy detailed balance") {
    const RegionGraph g = fig2_graph(false);
    for (int rep = 0; rep < 3; ++rep) {
        const TargetDistribution w = random_target(9, 100 + rep);
        const ChainSolution sol = optimize_fmrmc(g, w);
        verify_solution(sol, g);
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j)
                CHECK(std::fabs(sol.transition(i, j) * sol.target.weights[j] -
                                sol.transition(j, i) * sol.target.weights[i]) <= 1e-7);
    }
}

TEST_CASE("modified upper-bound matches fmrmc on the undirected benchmark graph") {
    const RegionGraph g = fig2_graph(false);
    for (int rep = 0; rep < 5; ++rep) {
        const TargetDistribution w = random_target(9, 200 + rep);
        const ChainSolution a = optimize_modified_upper_bound(g, w);
        const ChainSolution b = optimize_fmrmc(g, w);
        verify_solution(a, g);
        verify_solution(b, g);
        CHECK(std::fabs(a.slem - b.slem) <= 1e-3);
    }
}

TEST_CASE("directed benchmark: fmrmc removes the one-way edges, mub keeps them") {
    const RegionGraph g = fig2_graph(true);
    const TargetDistribution w = random_target(9, 300);
    const ChainSolution f = optimize_fmrmc(g, w);
    REQUIRE(f.removed_edges.size() == 2);
    CHECK(f.removed_edges[0] == std::make_pair(1, 4));
    CHECK(f.removed_edges[1] == std::make_pair(6, 7));
    CHECK(f.transition(4, 1) == 0.0);

    const ChainSolution m = optimize_modified_upper_bound(g, w);
    verify_solution(f, g);
    verify_solution(m, g);
    CHECK(m.slem <= f.slem + 1e-3);
}

TEST_CASE("fmrmc reports infeasibility when reversibility disconnects the graph") {
    const RegionGraph g = make_graph(3, {{0, 1}, {1, 2}, {2, 0}}, {}, true);
    CHECK_THROWS_AS((void)optimize_fmrmc(g, make_target({0.4, 0.3, 0.3}), {}), Error);
}

TEST_CASE("metropolis-hastings is the worst method on average") {
    const RegionGraph g = fig2_graph(false);
    double mh = 0.0, fm = 0.0;
    const int trials = 12;
    for (int t = 0; t < trials; ++t) {
        const TargetDistribution w = random_target(9, 400 + t);
        mh += metropolis_hastings(g, w).slem;
        fm += optimize_fmrmc(g, w).slem;
    }
    CHECK(mh / trials > fm / trials);
}

TEST_CASE("sandwich: slem never exceeds the spectral objective") {
    const RegionGraph g = fig2_graph(true);
    for (int t = 0; t < 3; ++t) {
        const TargetDistribution w = random_target(9, 500 + t);
        for (Method m : kBenchMethods) {
            const ChainSolution sol = solve_with_method(m, g, w);
            CHECK(sol.slem <= sol.objective_value + 1e-6);
        }
    }
}

TEST_CASE("solved chains are empirically ergodic (smoke walk)") {
    const RegionGraph g = fig2_graph(true);
    const TargetDistribution w = random_target(9, 600);
    const ChainSolution sol = optimize_modified_upper_bound(g, w);
    CHECK(chain_tv_after_walk(sol, 200000, 777) <= 0.02);
}

TEST_CASE("solution json round trip") {
    const RegionGraph g = fig2_graph(true);
    const ChainSolution sol = optimize_fmrmc(g, random_target(9, 700));
    const ChainSolution back = solution_from_json(solution_to_json(sol));
    CHECK(back.method == sol.method);
    CHECK(back.slem == sol.slem);
    CHECK(back.objective_value == sol.objective_value);
    CHECK(back.transition.a == sol.transition.a);
    CHECK(back.removed_edges == sol.removed_edges);
    CHECK_THROWS_AS((void)solution_from_json("{"), Error);
}

TEST_CASE("stationarity precondition is enforced by deflate") {
    Matrix P(2, 2, 0.0);  // swap chain: stationary only for the uniform target
    P(0, 1) = 1.0;
    P(1, 0) = 1.0;
    CHECK_THROWS_AS((void)deflate(P, make_target({0.9, 0.1})), Error);
}

TEST_CASE("rejected proposals may hold even on loop-free graphs") {
    const RegionGraph g = complete_graph(3, false);
    const ChainSolution sol = metropolis_hastings(g, make_target({0.6, 0.3, 0.1}));
    verify_solution(sol, g);  // the validator admits the MH diagonal
    double diag = 0.0;
    for (int i = 0; i < 3; ++i) diag += sol.transition(i, i);
    CHECK(diag > 0.0);
}
