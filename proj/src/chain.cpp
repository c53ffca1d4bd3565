#include "ergo/chain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "ergo/rng.hpp"

namespace ergo {

using nlohmann::json;

const char* to_string(Method m) {
    switch (m) {
        case Method::MetropolisHastings: return "metropolis-hastings";
        case Method::Fmrmc: return "fmrmc";
        case Method::UpperBound: return "upper-bound";
        case Method::ModifiedUpperBound: return "modified-upper-bound";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "metropolis-hastings" || name == "mh") return Method::MetropolisHastings;
    if (name == "fmrmc") return Method::Fmrmc;
    if (name == "upper-bound") return Method::UpperBound;
    if (name == "modified-upper-bound") return Method::ModifiedUpperBound;
    raise(ErrorCode::ParseError, "unknown method '" + name + "'");
}

// ---------------------------------------------------------------------------
// Metropolis-Hastings baseline
// ---------------------------------------------------------------------------

namespace {

bool strongly_connected(int n, const std::vector<std::vector<int>>& adj,
                        const std::vector<std::vector<int>>& radj) {
    auto bfs = [n](const std::vector<std::vector<int>>& a) {
        std::vector<char> seen(n, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 1;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : a[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++count;
                    q.push(v);
                }
        }
        return count == n;
    };
    return bfs(adj) && bfs(radj);
}

double ub_objective(const Matrix& P, const Vector& w) {
    const int n = P.rows;
    Matrix D = P;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D(i, j) -= w[i];
    return svd_full(D).sigma[0];
}

double similarity_objective(const Matrix& P, const Vector& w) {
    const int n = P.rows;
    Vector q(n);
    for (int i = 0; i < n; ++i) q[i] = std::sqrt(w[i]);
    Matrix D(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) D(i, j) = P(i, j) * q[j] / q[i] - q[i] * q[j];
    return svd_full(D).sigma[0];
}

}  // namespace

ChainSolution metropolis_hastings(const RegionGraph& g, const TargetDistribution& target) {
    require_valid(g);
    const TargetDistribution t = apply_weight_floor(target);
    if (static_cast<int>(t.weights.size()) != g.node_count)
        raise(ErrorCode::ValidationError, "target size does not match node count");
    const Vector& w = t.weights;
    const int n = g.node_count;
    const auto adj = g.out_neighbors();

    std::vector<int> outdeg(n);
    for (int j = 0; j < n; ++j)
        outdeg[j] = static_cast<int>(adj[j].size()) + (g.allow_self_loops ? 1 : 0);

    Matrix P(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        if (outdeg[j] == 0) raise(ErrorCode::NotApplicable, "node without proposals");
        double hold = 1.0;
        for (int k : adj[j]) {
            const double q_kj = 1.0 / outdeg[j];           // propose j -> k
            const double q_jk = g.has_edge(k, j) ? 1.0 / outdeg[k] : 0.0;
            const double acc = q_jk > 0.0 ? std::min(1.0, (w[k] * q_jk) / (w[j] * q_kj)) : 0.0;
            P(k, j) = q_kj * acc;
            hold -= P(k, j);
        }
        P(j, j) = hold;
    }

    // one-way edges always reject; the surviving edges must keep the chain connected
    std::vector<std::vector<int>> eff(n), reff(n);
    for (int j = 0; j < n; ++j)
        for (int k : adj[j])
            if (P(k, j) > 0.0) {
                eff[j].push_back(k);
                reff[k].push_back(j);
            }
    if (!strongly_connected(n, eff, reff))
        raise(ErrorCode::NotApplicable,
              "always-rejected one-way edges disconnect the Metropolis-Hastings chain");

    ChainSolution sol;
    sol.transition = P;
    sol.target = t;
    sol.method = Method::MetropolisHastings;
    sol.slem = slem_of(P, t);
    sol.objective_value = ub_objective(P, w);
    return sol;
}

// ---------------------------------------------------------------------------
// deflation and SLEM
// ---------------------------------------------------------------------------

Matrix deflate(const Matrix& P, const TargetDistribution& target) {
    const Vector& w = target.weights;
    const Vector pw = mul(P, w);
    double err = 0.0;
    for (size_t i = 0; i < w.size(); ++i) err = std::max(err, std::fabs(pw[i] - w[i]));
    if (err > tol::stationarity)
        raise(ErrorCode::StationarityViolated, "|Pw - w|_inf = " + std::to_string(err));
    Matrix D = P;
    for (int i = 0; i < D.rows; ++i)
        for (int j = 0; j < D.cols; ++j) D(i, j) -= w[i];
    return D;
}

double slem_of(const Matrix& P, const TargetDistribution& target) {
    return eigenvalue_moduli(deflate(P, target))[0];
}

// ---------------------------------------------------------------------------
// feasible-set machinery shared by the three optimizers
// ---------------------------------------------------------------------------

namespace {

struct FreeCell {
    int i, j;
    bool mirrored;  // also controls (j, i)
};

// Polyhedron {x >= 0, A x = b} over the free cells of an n x n matrix, with
// the Frobenius metric of the full matrix (mirrored cells weigh double).
struct PatternPolyhedron {
    int n = 0;
    std::vector<FreeCell> vars;
    Vector mult;  // 1 or 2
    Matrix A;
    Vector b;
    Matrix K;  // m x rows, K = M^-1 A^T pinv(A M^-1 A^T)

    void finish() {
        const int rows = A.rows;
        const int m = static_cast<int>(vars.size());
        Matrix AMAt(rows, rows, 0.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < rows; ++c) {
                double s = 0.0;
                for (int v = 0; v < m; ++v) s += A(r, v) * A(c, v) / mult[v];
                AMAt(r, c) = s;
            }
        const Matrix pinv = pinv_sym(AMAt, 1e-12);
        K = Matrix(m, rows, 0.0);
        for (int v = 0; v < m; ++v)
            for (int r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int c = 0; c < rows; ++c) s += A(c, v) * pinv(c, r);
                K(v, r) = s / mult[v];
            }
    }

    Vector gather(const Matrix& X) const {
        Vector x(vars.size());
        for (size_t v = 0; v < vars.size(); ++v) x[v] = X(vars[v].i, vars[v].j);
        return x;
    }

    void scatter(const Vector& x, Matrix& X) const {
        std::fill(X.a.begin(), X.a.end(), 0.0);
        for (size_t v = 0; v < vars.size(); ++v) {
            X(vars[v].i, vars[v].j) = x[v];
            if (vars[v].mirrored) X(vars[v].j, vars[v].i) = x[v];
        }
    }

    void project_affine(Vector& x) const {
        const int rows = A.rows;
        Vector r(rows, 0.0);
        for (int c = 0; c < rows; ++c) {
            double s = -b[c];
            for (size_t v = 0; v < vars.size(); ++v) s += A(c, static_cast<int>(v)) * x[v];
            r[c] = s;
        }
        for (size_t v = 0; v < vars.size(); ++v) {
            double s = 0.0;
            for (int c = 0; c < rows; ++c) s += K(static_cast<int>(v), c) * r[c];
            x[v] -= s;
        }
    }

    double affine_residual(const Vector& x) const {
        double worst = 0.0;
        for (int c = 0; c < A.rows; ++c) {
            double s = -b[c];
            for (size_t v = 0; v < vars.size(); ++v) s += A(c, static_cast<int>(v)) * x[v];
            worst = std::max(worst, std::fabs(s));
        }
        return worst;
    }

    // projection onto {A x = b, x_i = 0 for pinned i} in the weighted metric
    void project_affine_pinned(Vector& x, const std::vector<char>& pinned) const {
        const int rows = A.rows;
        const int m = static_cast<int>(vars.size());
        for (int v = 0; v < m; ++v)
            if (pinned[v]) x[v] = 0.0;
        Matrix AMAt(rows, rows, 0.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < rows; ++c) {
                double s = 0.0;
                for (int v = 0; v < m; ++v)
                    if (!pinned[v]) s += A(r, v) * A(c, v) / mult[v];
                AMAt(r, c) = s;
            }
        const Matrix pinv = pinv_sym(AMAt, 1e-12);
        Vector r(rows, 0.0);
        for (int c = 0; c < rows; ++c) {
            double s = -b[c];
            for (int v = 0; v < m; ++v)
                if (!pinned[v]) s += A(c, v) * x[v];
            r[c] = s;
        }
        const Vector pr = mul(pinv, r);
        for (int v = 0; v < m; ++v) {
            if (pinned[v]) continue;
            double s = 0.0;
            for (int c = 0; c < rows; ++c) s += A(c, v) * pr[c];
            x[v] -= s / mult[v];
        }
    }
};

// cell (i, j) is free iff transition j -> i is allowed
bool cell_allowed(const RegionGraph& g, int i, int j) { return g.has_edge(j, i); }

// UB: variables are P entries; rows = stationarity (Pw = w) then column sums.
PatternPolyhedron build_p_space(const RegionGraph& g, const Vector& w) {
    PatternPolyhedron C;
    const int n = g.node_count;
    C.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cell_allowed(g, i, j)) C.vars.push_back({i, j, false});
    const int m = static_cast<int>(C.vars.size());
    C.mult.assign(m, 1.0);
    C.A = Matrix(2 * n, m, 0.0);
    C.b.assign(2 * n, 0.0);
    for (int v = 0; v < m; ++v) {
        const auto& [i, j, mir] = C.vars[v];
        C.A(i, v) += w[j];
        C.A(n + j, v) += 1.0;
    }
    for (int i = 0; i < n; ++i) C.b[i] = w[i];
    for (int j = 0; j < n; ++j) C.b[n + j] = 1.0;
    C.finish();
    return C;
}

// MUB: variables are S = W^-1/2 P W^1/2 entries; rows = Sq = q, q^T S = q^T.
PatternPolyhedron build_s_space(const RegionGraph& g, const Vector& q) {
    PatternPolyhedron C;
    const int n = g.node_count;
    C.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (cell_allowed(g, i, j)) C.vars.push_back({i, j, false});
    const int m = static_cast<int>(C.vars.size());
    C.mult.assign(m, 1.0);
    C.A = Matrix(2 * n, m, 0.0);
    C.b.assign(2 * n, 0.0);
    for (int v = 0; v < m; ++v) {
        const auto& [i, j, mir] = C.vars[v];
        C.A(i, v) += q[j];
        C.A(n + j, v) += q[i];
    }
    for (int i = 0; i < n; ++i) C.b[i] = q[i];
    for (int j = 0; j < n; ++j) C.b[n + j] = q[j];
    C.finish();
    return C;
}

// FMRMC: symmetric S on the mutual-edge pattern; rows = Sq = q only.
PatternPolyhedron build_sym_space(const RegionGraph& g, const Vector& q) {
    PatternPolyhedron C;
    const int n = g.node_count;
    C.n = n;
    for (int i = 0; i < n; ++i) {
        if (g.allow_self_loops) C.vars.push_back({i, i, false});
        for (int j = i + 1; j < n; ++j)
            if (cell_allowed(g, i, j) && cell_allowed(g, j, i)) C.vars.push_back({i, j, true});
    }
    const int m = static_cast<int>(C.vars.size());
    C.mult.resize(m);
    for (int v = 0; v < m; ++v) C.mult[v] = C.vars[v].mirrored ? 2.0 : 1.0;
    C.A = Matrix(n, m, 0.0);
    C.b.assign(n, 0.0);
    for (int v = 0; v < m; ++v) {
        const auto& [i, j, mir] = C.vars[v];
        C.A(i, v) += q[j];
        if (mir) C.A(j, v) += q[i];
    }
    for (int i = 0; i < n; ++i) C.b[i] = q[i];
    C.finish();
    return C;
}

// Euclidean projection of a descending nonnegative vector onto the l1 ball
// of radius t.
Vector project_l1_ball_sorted(const Vector& s, double t) {
    double sum = std::accumulate(s.begin(), s.end(), 0.0);
    if (sum <= t) return s;
    const int n = static_cast<int>(s.size());
    double cum = 0.0;
    double theta = 0.0;
    int rho = 0;
    for (int k = 0; k < n; ++k) {
        cum += s[k];
        const double cand = (cum - t) / (k + 1);
        if (s[k] - cand > 0.0) {
            rho = k + 1;
            theta = cand;
        }
    }
    (void)rho;
    Vector out(s.size());
    for (size_t i = 0; i < s.size(); ++i) out[i] = std::max(s[i] - theta, 0.0);
    return out;
}

// prox of t * |.|_2 (spectral norm) via Moreau decomposition
Matrix prox_spectral_norm(const Matrix& V, double t) {
    const Svd svd = svd_full(V);
    const Vector proj = project_l1_ball_sorted(svd.sigma, t);
    const int n = V.rows;
    Matrix out(n, n, 0.0);
    for (size_t k = 0; k < svd.sigma.size(); ++k) {
        const double coeff = svd.sigma[k] - proj[k];
        if (coeff == 0.0) continue;
        for (int i = 0; i < n; ++i) {
            const double uik = svd.u(i, static_cast<int>(k)) * coeff;
            if (uik == 0.0) continue;
            for (int j = 0; j < n; ++j) out(i, j) += uik * svd.v(j, static_cast<int>(k));
        }
    }
    return out;
}

// Exact feasibility: Dykstra between the affine set and the nonnegative
// orthant, returning the clamped (pattern-exact, nonnegative) iterate and the
// residual distance between the two sets (positive when the polyhedron is
// empty).
struct Feasibilized {
    Matrix X;
    double gap = 0.0;
};

Feasibilized feasibilize(const PatternPolyhedron& C, const Matrix& X) {
    Vector x = C.gather(X);
    C.project_affine(x);
    const size_t m = x.size();
    Vector p(m, 0.0), q(m, 0.0), y(m), x2(m);
    double gap = 0.0;
    for (int it = 0; it < 3000; ++it) {
        for (size_t v = 0; v < m; ++v) {
            y[v] = std::max(x[v] + p[v], 0.0);
            p[v] = x[v] + p[v] - y[v];
        }
        for (size_t v = 0; v < m; ++v) x2[v] = y[v] + q[v];
        C.project_affine(x2);
        gap = 0.0;
        for (size_t v = 0; v < m; ++v) {
            q[v] = y[v] + q[v] - x2[v];
            gap = std::max(gap, std::fabs(x2[v] - y[v]));
        }
        x = x2;
        if (gap <= 1e-13) break;
    }

    if (gap > 1e-13) {
        // Dykstra crawls on sliver polytopes (tiny stationary weights). Pin
        // the near-zero entries and project exactly onto what remains; repeat
        // until the free part is nonnegative.
        std::vector<char> pinned(m, 0);
        for (size_t v = 0; v < m; ++v) pinned[v] = y[v] <= 1e-11 ? 1 : 0;
        for (size_t round = 0; round <= m; ++round) {
            Vector z = y;
            C.project_affine_pinned(z, pinned);
            bool clean = true;
            for (size_t v = 0; v < m; ++v) {
                if (!pinned[v] && z[v] < -1e-12) {
                    pinned[v] = 1;
                    clean = false;
                }
            }
            if (clean) {
                for (double& v : z) v = std::max(v, 0.0);
                y = z;
                break;
            }
        }
    }

    Feasibilized out;
    out.X = Matrix(C.n, C.n);
    C.scatter(y, out.X);
    double neg = 0.0;
    for (double v : y) neg = std::max(neg, -v);
    out.gap = std::max(C.affine_residual(y), neg);
    return out;
}

struct AdmmResult {
    Matrix X;  // best feasible iterate
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

// min |X - B|_2  s.t.  X in {pattern, Ax = b, x >= 0}
//
// Consensus splitting: Y carries the nonnegativity, Z = X - B carries the
// norm, X carries the affine constraints; two-block ADMM with exact
// subproblem solutions (affine projection, clamp, spectral prox). The best
// feasibilized iterate is tracked throughout; the solve stops on small
// residuals or when that iterate's objective stops improving by more than
// the tolerance over a 200-iteration window.
AdmmResult admm_spectral_min(const PatternPolyhedron& C, const Matrix& B, const Matrix& X0,
                             const SolverSettings& settings) {
    const int n = C.n;
    const bool adaptive = settings.step_schedule != "fixed-rho";
    double rho = 1.0;

    Matrix X = X0;
    Matrix Y = X;
    for (double& y : Y.a) y = std::max(y, 0.0);
    Matrix Z = X - B;
    Matrix Uy(n, n, 0.0), Uz(n, n, 0.0);

    const double eps_abs = 1e-12;
    const double eps_rel = std::min(1e-8, settings.tolerance);
    constexpr int kEvalEvery = 25;
    constexpr int kStallWindow = 200;  // iterations without tolerance-level progress

    AdmmResult res;
    res.objective = std::numeric_limits<double>::infinity();
    int last_improvement = 0;
    Vector xbuf;

    auto consider_candidate = [&](int it) {
        const Feasibilized cand = feasibilize(C, X);
        const double obj = svd_full(cand.X - B).sigma[0];
        if (obj < res.objective - settings.tolerance) last_improvement = it;
        if (obj < res.objective) {
            res.objective = obj;
            res.X = cand.X;
        }
    };

    for (int it = 0; it < settings.max_iterations; ++it) {
        // X-update: affine projection of the average consensus point
        Matrix Arg(n, n);
        for (size_t k = 0; k < Arg.a.size(); ++k)
            Arg.a[k] = 0.5 * ((Y.a[k] - Uy.a[k]) + (B.a[k] + Z.a[k] - Uz.a[k]));
        xbuf = C.gather(Arg);
        C.project_affine(xbuf);
        C.scatter(xbuf, X);

        // Y-update: clamp
        const Matrix Yprev = Y;
        for (size_t k = 0; k < Y.a.size(); ++k) Y.a[k] = std::max(X.a[k] + Uy.a[k], 0.0);

        // Z-update: spectral prox
        const Matrix Zprev = Z;
        Matrix Varg(n, n);
        for (size_t k = 0; k < Varg.a.size(); ++k) Varg.a[k] = X.a[k] - B.a[k] + Uz.a[k];
        Z = prox_spectral_norm(Varg, 1.0 / rho);

        // dual updates
        double r2 = 0.0;
        for (size_t k = 0; k < X.a.size(); ++k) {
            const double ry = X.a[k] - Y.a[k];
            const double rz = X.a[k] - B.a[k] - Z.a[k];
            Uy.a[k] += ry;
            Uz.a[k] += rz;
            r2 += ry * ry + rz * rz;
        }
        double s2 = 0.0;
        for (size_t k = 0; k < Y.a.size(); ++k) {
            const double dy = Y.a[k] - Yprev.a[k];
            const double dz = Z.a[k] - Zprev.a[k];
            s2 += dy * dy + dz * dz;
        }
        const double r_norm = std::sqrt(r2);
        const double s_norm = rho * std::sqrt(s2);

        double scale = 0.0;
        for (size_t k = 0; k < X.a.size(); ++k) {
            scale = std::max(scale, std::fabs(X.a[k]));
            scale = std::max(scale, std::fabs(Y.a[k]));
            scale = std::max(scale, std::fabs(Z.a[k]));
        }
        const double eps_stop = eps_abs * n + eps_rel * std::max(scale, 1.0);
        if (r_norm <= eps_stop && s_norm <= eps_stop) {
            consider_candidate(it);
            res.converged = true;
            res.iterations = it + 1;
            return res;
        }

        if ((it + 1) % kEvalEvery == 0) {
            consider_candidate(it);
            if (it - last_improvement >= kStallWindow && it >= 2000) {
                res.converged = true;  // objective plateau
                res.iterations = it + 1;
                return res;
            }
        }

        if (adaptive && (it + 1) % 50 == 0) {
            if (r_norm > 10.0 * s_norm) {
                rho *= 2.0;
                for (double& u : Uy.a) u *= 0.5;
                for (double& u : Uz.a) u *= 0.5;
            } else if (s_norm > 10.0 * r_norm) {
                rho *= 0.5;
                for (double& u : Uy.a) u *= 2.0;
                for (double& u : Uz.a) u *= 2.0;
            }
        }
    }
    consider_candidate(settings.max_iterations - 1);
    res.iterations = settings.max_iterations;
    return res;
}

// column renormalization; verifies the result is usable
void normalize_columns(Matrix& P) {
    for (int j = 0; j < P.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < P.rows; ++i) s += P(i, j);
        if (s <= 0.0) raise(ErrorCode::SolverStalled, "empty transition column");
        for (int i = 0; i < P.rows; ++i) P(i, j) /= s;
    }
}

Matrix initial_chain(const RegionGraph& g, const TargetDistribution& t) {
    // MH on the undirected closure is always well defined for a valid graph
    return metropolis_hastings(g.skeleton(), t).transition;
}

enum class Space { P, S, SymS };

ChainSolution run_optimizer(Method method, Space space, const RegionGraph& g,
                            const TargetDistribution& target, const SolverSettings& settings,
                            std::vector<std::pair<int, int>> removed_edges) {
    const TargetDistribution t = apply_weight_floor(target);
    const Vector& w = t.weights;
    const int n = g.node_count;
    Vector q(n);
    for (int i = 0; i < n; ++i) q[i] = std::sqrt(w[i]);

    PatternPolyhedron C;
    Matrix B(n, n);
    if (space == Space::P) {
        C = build_p_space(g, w);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) B(i, j) = w[i];
    } else {
        C = space == Space::S ? build_s_space(g, q) : build_sym_space(g, q);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) B(i, j) = q[i] * q[j];
    }

    // start from the Metropolis-Hastings chain mapped into the variable space
    const Matrix P0 = initial_chain(g, t);
    Matrix X0(n, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double x = P0(i, j);
            if (space != Space::P) x *= q[j] / q[i];
            X0(i, j) = x;
        }
    if (space == Space::SymS) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double avg = 0.5 * (X0(i, j) + X0(j, i));
                X0(i, j) = X0(j, i) = avg;
            }
    }
    {
        Vector x0 = C.gather(X0);
        C.project_affine(x0);
        C.scatter(x0, X0);
    }

    // Loop-free graphs with lopsided targets can have an empty feasible set
    // (no holding probability to absorb the imbalance); detect it up front.
    if (feasibilize(C, X0).gap > 1e-9)
        raise(ErrorCode::Infeasible,
              "no stochastic matrix with this stationary vector exists on the edge set");

    const int restarts = std::max(1, settings.restarts);
    Matrix best;
    double best_obj = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    RandomStream restart_rng(derive_seed(settings.seed, "solver-restart"));
    for (int r = 0; r < restarts; ++r) {
        Matrix start = X0;
        if (r > 0) {
            for (double& v : start.a)
                if (v != 0.0) v = std::max(0.0, v + 0.05 * restart_rng.normal());
            Vector x = C.gather(start);
            C.project_affine(x);
            C.scatter(x, start);
        }
        const AdmmResult res = admm_spectral_min(C, B, start, settings);
        any_converged = any_converged || res.converged;
        if (res.objective < best_obj) {
            best_obj = res.objective;
            best = res.X;
        }
    }
    if (!any_converged)
        raise(ErrorCode::SolverStalled,
              "ADMM did not reach tolerance in " + std::to_string(settings.max_iterations) +
                  " iterations");

    // map back to a transition matrix and make it exactly stochastic
    Matrix P(n, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double x = best(i, j);
            if (space != Space::P) x *= q[i] / q[j];
            P(i, j) = x;
        }
    for (double& v : P.a) {
        if (v < -1e-10) raise(ErrorCode::SolverStalled, "negative transition probability");
        if (v < 0.0) v = 0.0;
    }
    normalize_columns(P);

    const Vector pw = mul(P, w);
    double stat_err = 0.0;
    for (int i = 0; i < n; ++i) stat_err = std::max(stat_err, std::fabs(pw[i] - w[i]));
    if (stat_err > 1e-7)
        raise(ErrorCode::SolverStalled, "stationarity violated after clamping: " +
                                            std::to_string(stat_err));

    ChainSolution sol;
    sol.transition = P;
    sol.target = t;
    sol.method = method;
    sol.slem = slem_of(P, t);
    sol.objective_value =
        space == Space::P ? ub_objective(P, w) : similarity_objective(P, w);
    sol.removed_edges = std::move(removed_edges);
    return sol;
}

}  // namespace

ChainSolution optimize_upper_bound(const RegionGraph& g, const TargetDistribution& target,
                                   const SolverSettings& settings) {
    require_valid(g);
    return run_optimizer(Method::UpperBound, Space::P, g, target, settings, {});
}

ChainSolution optimize_modified_upper_bound(const RegionGraph& g,
                                            const TargetDistribution& target,
                                            const SolverSettings& settings) {
    require_valid(g);
    return run_optimizer(Method::ModifiedUpperBound, Space::S, g, target, settings, {});
}

ChainSolution optimize_fmrmc(const RegionGraph& g, const TargetDistribution& target,
                             const SolverSettings& settings) {
    require_valid(g);
    // reversibility zeroes every edge whose reverse is absent
    std::vector<std::pair<int, int>> removed;
    std::vector<std::vector<int>> mutual(g.node_count), rmutual(g.node_count);
    for (const auto& [u, v] : g.edges) {
        if (g.has_edge(v, u)) {
            mutual[u].push_back(v);
            rmutual[v].push_back(u);
        } else {
            removed.emplace_back(u, v);
        }
    }
    if (!strongly_connected(g.node_count, mutual, rmutual) && g.node_count > 1)
        raise(ErrorCode::Infeasible,
              "removing one-way edges (reversibility) disconnects the graph");
    return run_optimizer(Method::Fmrmc, Space::SymS, g, target, settings, std::move(removed));
}

ChainSolution solve_with_method(Method m, const RegionGraph& g, const TargetDistribution& target,
                                const SolverSettings& settings) {
    switch (m) {
        case Method::MetropolisHastings: return metropolis_hastings(g, target);
        case Method::Fmrmc: return optimize_fmrmc(g, target, settings);
        case Method::UpperBound: return optimize_upper_bound(g, target, settings);
        case Method::ModifiedUpperBound:
            return optimize_modified_upper_bound(g, target, settings);
    }
    raise(ErrorCode::ValidationError, "unknown method");
}

// ---------------------------------------------------------------------------
// invariant checks
// ---------------------------------------------------------------------------

void verify_solution(const ChainSolution& sol, const RegionGraph& g) {
    const Matrix& P = sol.transition;
    const int n = g.node_count;
    if (P.rows != n || P.cols != n) raise(ErrorCode::ValidationError, "transition size mismatch");
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = P(i, j);
            if (v < -1e-10) raise(ErrorCode::ValidationError, "negative entry");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-8)
            raise(ErrorCode::ValidationError, "column " + std::to_string(j) + " sums to " +
                                                   std::to_string(s));
    }
    // sparsity: diagonal is always reachable for MH (rejection mass) and for
    // FMRMC only the mutual-edge pattern is allowed
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (P(i, j) == 0.0) continue;
            if (i == j) {
                if (!g.allow_self_loops && sol.method != Method::MetropolisHastings)
                    raise(ErrorCode::ValidationError, "self transition on a loop-free graph");
                continue;
            }
            bool ok = g.has_edge(j, i);
            if (ok && sol.method == Method::Fmrmc) ok = g.has_edge(i, j);
            if (!ok)
                raise(ErrorCode::ValidationError, "nonzero entry off the edge set: P(" +
                                                       std::to_string(i) + "," +
                                                       std::to_string(j) + ")");
        }
    const Vector pw = mul(P, sol.target.weights);
    for (int i = 0; i < n; ++i)
        if (std::fabs(pw[i] - sol.target.weights[i]) > 1e-7)
            raise(ErrorCode::ValidationError, "stationarity violated");
    if (sol.slem < 0.0 || sol.slem > 1.0 + 1e-8)
        raise(ErrorCode::ValidationError, "slem out of range");
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string solution_to_json(const ChainSolution& sol, const std::string& manifest) {
    json rows = json::array();
    for (int i = 0; i < sol.transition.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < sol.transition.cols; ++j) row.push_back(sol.transition(i, j));
        rows.push_back(row);
    }
    json removed = json::array();
    for (const auto& [u, v] : sol.removed_edges) removed.push_back({u, v});
    json j{{"method", to_string(sol.method)},
           {"w", sol.target.weights},
           {"P", rows},
           {"slem", sol.slem},
           {"objective", sol.objective_value}};
    if (!sol.removed_edges.empty()) j["removed_edges"] = removed;
    if (!manifest.empty()) j["manifest"] = manifest;
    return j.dump(2) + "\n";
}

ChainSolution solution_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
    try {
        ChainSolution sol;
        sol.method = method_from_string(j.at("method").get<std::string>());
        sol.target = make_target(j.at("w").get<Vector>());
        const auto& rows = j.at("P");
        const int n = static_cast<int>(rows.size());
        sol.transition = Matrix(n, n);
        for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj) sol.transition(i, jj) = rows[i][jj].get<double>();
        sol.slem = j.at("slem").get<double>();
        sol.objective_value = j.at("objective").get<double>();
        if (j.contains("removed_edges"))
            for (const auto& e : j.at("removed_edges"))
                sol.removed_edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        return sol;
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, e.what());
    }
}

ChainSolution load_solution(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::ParseError, "cannot open solution file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return solution_from_json(ss.str());
}

void save_solution(const ChainSolution& sol, const std::string& path,
                   const std::string& manifest) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::ValidationError, "cannot write solution file " + path);
    out << solution_to_json(sol, manifest);
}

}  // namespace ergo
