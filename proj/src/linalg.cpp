#include "ergo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ergo {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

// ---------------------------------------------------------------------------
// basics
// ---------------------------------------------------------------------------

Matrix Matrix::identity(int n) {
    Matrix m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diag(const Vector& d) {
    const int n = static_cast<int>(d.size());
    Matrix m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
}

Matrix operator*(const Matrix& A, const Matrix& B) {
    Matrix C(A.rows, B.cols, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        for (int k = 0; k < A.cols; ++k) {
            const double aik = A(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
        }
    }
    return C;
}

Matrix operator+(const Matrix& A, const Matrix& B) {
    Matrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
    return C;
}

Matrix operator-(const Matrix& A, const Matrix& B) {
    Matrix C = A;
    for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
    return C;
}

Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix M(static_cast<int>(u.size()), static_cast<int>(v.size()));
    for (size_t i = 0; i < u.size(); ++i)
        for (size_t j = 0; j < v.size(); ++j) M(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
    return M;
}

Vector mul(const Matrix& A, const Vector& x) {
    Vector y(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < A.cols; ++j) s += A(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Vector& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::fabs(x));
    return m;
}

double frobenius_norm(const Matrix& A) {
    double s = 0.0;
    for (double x : A.a) s += x * x;
    return std::sqrt(s);
}

double max_abs(const Matrix& A) {
    double m = 0.0;
    for (double x : A.a) m = std::max(m, std::fabs(x));
    return m;
}

// ---------------------------------------------------------------------------
// LU solve
// ---------------------------------------------------------------------------

namespace {

struct LuFactor {
    Matrix lu;
    std::vector<int> piv;
};

LuFactor lu_factor(const Matrix& A) {
    const int n = A.rows;
    LuFactor f{A, std::vector<int>(n)};
    Matrix& m = f.lu;
    const double scale = std::max(max_abs(A), std::numeric_limits<double>::min());
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::fabs(m(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::fabs(m(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best <= 8.0 * n * kEps * scale)
            raise(ErrorCode::SingularMatrix, "no usable pivot in column " + std::to_string(k));
        f.piv[k] = p;
        if (p != k)
            for (int j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
        const double inv = 1.0 / m(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double l = m(i, k) * inv;
            m(i, k) = l;
            if (l == 0.0) continue;
            for (int j = k + 1; j < n; ++j) m(i, j) -= l * m(k, j);
        }
    }
    return f;
}

Vector lu_solve(const LuFactor& f, Vector b) {
    const int n = f.lu.rows;
    // apply the whole row permutation before substituting; the stored
    // multipliers are in final row order
    for (int k = 0; k < n; ++k) std::swap(b[k], b[f.piv[k]]);
    for (int k = 0; k < n; ++k)
        for (int i = k + 1; i < n; ++i) b[i] -= f.lu(i, k) * b[k];
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= f.lu(i, j) * b[j];
        b[i] = s / f.lu(i, i);
    }
    return b;
}

}  // namespace

Vector solve_linear(const Matrix& A, const Vector& b) {
    if (!A.square() || static_cast<int>(b.size()) != A.rows)
        raise(ErrorCode::ValidationError, "solve_linear needs a square system");
    const LuFactor f = lu_factor(A);
    Vector x = lu_solve(f, b);
    // iterative refinement; two rounds are plenty at the condition numbers we accept
    for (int round = 0; round < 2; ++round) {
        Vector r = mul(A, x);
        for (size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
        if (max_abs(r) <= 0.5 * tol::solve_residual * (1.0 + max_abs(b))) break;
        const Vector d = lu_solve(f, r);
        for (size_t i = 0; i < x.size(); ++i) x[i] += d[i];
    }
    return x;
}

Matrix inverse(const Matrix& A) {
    const int n = A.rows;
    const LuFactor f = lu_factor(A);
    Matrix inv(n, n);
    Vector e(n, 0.0);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Vector col = lu_solve(f, e);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return inv;
}

// ---------------------------------------------------------------------------
// spectral norm (power iteration on M^T M)
// ---------------------------------------------------------------------------

namespace {

Vector mul_transposed(const Matrix& A, const Vector& x) {
    Vector y(A.cols, 0.0);
    for (int i = 0; i < A.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < A.cols; ++j) y[j] += A(i, j) * xi;
    }
    return y;
}

}  // namespace

double spectral_norm(const Matrix& M, int max_iter, double rel_tol) {
    if (M.rows == 0 || M.cols == 0 || max_abs(M) == 0.0) return 0.0;
    const int n = M.cols;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 + static_cast<double>(i) / n;
    double nv = norm2(v);
    for (double& vi : v) vi /= nv;

    int fallback = 0;
    for (int it = 0; it < max_iter; ++it) {
        const Vector mv = mul(M, v);
        Vector z = mul_transposed(M, mv);
        const double lambda = dot(v, z);  // Rayleigh quotient of M^T M
        // symmetric eigenvalue residual bound: |lambda - lambda_true| <= |z - lambda v|
        double res = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = z[i] - lambda * v[i];
            res += d * d;
        }
        res = std::sqrt(res);
        if (lambda > 0.0 && res <= rel_tol * lambda) return std::sqrt(lambda);
        const double zn = norm2(z);
        if (zn == 0.0) {
            // start vector fell in the nullspace; restart from a basis vector
            std::fill(v.begin(), v.end(), 0.0);
            v[fallback % n] = 1.0;
            ++fallback;
            if (fallback > n) return 0.0;
            continue;
        }
        for (int i = 0; i < n; ++i) v[i] = z[i] / zn;
    }
    raise(ErrorCode::NonConvergence, "power iteration did not reach tolerance");
}

// ---------------------------------------------------------------------------
// eigenvalue moduli: Hessenberg reduction + Francis double-shift QR
// ---------------------------------------------------------------------------

namespace {

void hessenberg_reduce(Matrix& A) {
    const int n = A.rows;
    Vector v(n, 0.0);
    for (int k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale += std::fabs(A(i, k));
        if (scale == 0.0) continue;
        double h = 0.0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = A(i, k) / scale;
            h += v[i] * v[i];
        }
        const double f = v[k + 1];
        const double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        h -= f * g;  // now h = |v|^2 / 2 for the updated v
        v[k + 1] = f - g;
        // similarity transform P A P with P = I - v v^T / h
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = k + 1; i < n; ++i) s += v[i] * A(i, j);
            s /= h;
            for (int i = k + 1; i < n; ++i) A(i, j) -= s * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = k + 1; j < n; ++j) s += A(i, j) * v[j];
            s /= h;
            for (int j = k + 1; j < n; ++j) A(i, j) -= s * v[j];
        }
        A(k + 1, k) = scale * g;
        for (int i = k + 2; i < n; ++i) A(i, k) = 0.0;
    }
}

// Eigenvalues of an upper Hessenberg matrix. Classic hqr scheme with
// relative deflation thresholds; the matrix is destroyed.
void hqr_eigenvalues(Matrix& a, Vector& wr, Vector& wi) {
    const int n = a.rows;
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::fabs(a(i, j));
    if (anorm == 0.0) {
        std::fill(wr.begin(), wr.end(), 0.0);
        std::fill(wi.begin(), wi.end(), 0.0);
        return;
    }
    int nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::fabs(a(l - 1, l - 1)) + std::fabs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::fabs(a(l, l - 1)) <= kEps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = a(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::fabs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn] = z;
                        wi[nn - 1] = -z;
                    }
                    nn -= 2;
                } else {
                    if (its == tol::eig_max_sweeps)
                        raise(ErrorCode::NonConvergence, "QR iteration failed to deflate");
                    if (its != 0 && its % 10 == 0) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        const double s = std::fabs(a(nn, nn - 1)) + std::fabs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int m = 0;
                    double p = 0.0, q = 0.0, r = 0.0;
                    for (m = nn - 2; m >= l; --m) {
                        const double z = a(m, m);
                        const double rr = x - z;
                        const double ss = y - z;
                        p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - rr - ss;
                        r = a(m + 2, m + 1);
                        const double s = std::fabs(p) + std::fabs(q) + std::fabs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::fabs(a(m, m - 1)) * (std::fabs(q) + std::fabs(r));
                        const double vv = std::fabs(p) *
                            (std::fabs(a(m - 1, m - 1)) + std::fabs(z) + std::fabs(a(m + 1, m + 1)));
                        if (u <= kEps * vv) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
                            x = std::fabs(p) + std::fabs(q) + std::fabs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        const double z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            double pp = a(k, j) + q * a(k + 1, j);
                            if (k != nn - 1) {
                                pp += r * a(k + 2, j);
                                a(k + 2, j) -= pp * z;
                            }
                            a(k + 1, j) -= pp * y;
                            a(k, j) -= pp * x;
                        }
                        const int mmin = (nn < k + 3) ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            double pp = x * a(i, k) + y * a(i, k + 1);
                            if (k != nn - 1) {
                                pp += z * a(i, k + 2);
                                a(i, k + 2) -= pp * r;
                            }
                            a(i, k + 1) -= pp * q;
                            a(i, k) -= pp;
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
}

}  // namespace

Vector eigenvalue_moduli(const Matrix& M) {
    if (!M.square()) raise(ErrorCode::ValidationError, "eigenvalue_moduli needs a square matrix");
    const int n = M.rows;
    if (n == 1) return {std::fabs(M(0, 0))};
    Matrix H = M;
    hessenberg_reduce(H);
    Vector wr(n, 0.0), wi(n, 0.0);
    hqr_eigenvalues(H, wr, wi);
    Vector mod(n);
    for (int i = 0; i < n; ++i) mod[i] = std::hypot(wr[i], wi[i]);
    std::sort(mod.begin(), mod.end(), std::greater<double>());
    return mod;
}

// ---------------------------------------------------------------------------
// chi-squared upper tail (regularized incomplete gamma)
// ---------------------------------------------------------------------------

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_survival(double x, int dof) {
    if (dof < 1) raise(ErrorCode::ValidationError, "chi2_survival needs dof >= 1");
    if (!(x > 0.0)) return 1.0;
    const double a = 0.5 * dof;
    const double xs = 0.5 * x;
    const double q = (xs < a + 1.0) ? 1.0 - gamma_p_series(a, xs) : gamma_q_contfrac(a, xs);
    return std::clamp(q, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// PSD Cholesky + Gaussian sampling
// ---------------------------------------------------------------------------

Matrix cholesky_psd(const Matrix& cov) {
    if (!cov.square()) raise(ErrorCode::ValidationError, "cholesky_psd needs a square matrix");
    const int n = cov.rows;
    Matrix L(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        double d = cov(j, j);
        for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d < tol::psd_pivot)
            raise(ErrorCode::NotPSD, "pivot " + std::to_string(d) + " at index " + std::to_string(j));
        if (d <= 0.0) continue;  // semidefinite direction, column stays zero
        const double ljj = std::sqrt(d);
        L(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = cov(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / ljj;
        }
    }
    return L;
}

Vector sample_gaussian(const Vector& mean, const Matrix& cov, RandomStream& rng) {
    const int n = static_cast<int>(mean.size());
    const Matrix L = cholesky_psd(cov);
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    Vector out = mean;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j <= i; ++j) s += L(i, j) * z[j];
        out[i] += s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// one-sided Jacobi SVD
// ---------------------------------------------------------------------------

Svd svd_full(const Matrix& M) {
    const bool transposed = M.rows < M.cols;
    Matrix A = transposed ? transpose(M) : M;
    const int m = A.rows;
    const int n = A.cols;
    Matrix V = Matrix::identity(n);

    bool converged = false;
    for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < m; ++i) {
                    alpha += A(i, p) * A(i, p);
                    beta += A(i, q) * A(i, q);
                    gamma += A(i, p) * A(i, q);
                }
                if (alpha * beta == 0.0 || std::fabs(gamma) <= 1e-15 * std::sqrt(alpha * beta))
                    continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double tt =
                    std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + tt * tt);
                const double s = c * tt;
                for (int i = 0; i < m; ++i) {
                    const double ap = A(i, p), aq = A(i, q);
                    A(i, p) = c * ap - s * aq;
                    A(i, q) = s * ap + c * aq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = V(i, p), vq = V(i, q);
                    V(i, p) = c * vp - s * vq;
                    V(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) raise(ErrorCode::NonConvergence, "one-sided jacobi SVD stalled");

    Vector sigma(n, 0.0);
    Matrix U(m, n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s2 = 0.0;
        for (int i = 0; i < m; ++i) s2 += A(i, j) * A(i, j);
        sigma[j] = std::sqrt(s2);
        if (sigma[j] > 0.0)
            for (int i = 0; i < m; ++i) U(i, j) = A(i, j) / sigma[j];
    }
    // sort descending
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return sigma[i] > sigma[j]; });
    Svd out;
    out.sigma.resize(n);
    out.u = Matrix(m, n, 0.0);
    out.v = Matrix(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        out.sigma[j] = sigma[src];
        for (int i = 0; i < m; ++i) out.u(i, j) = U(i, src);
        for (int i = 0; i < n; ++i) out.v(i, j) = V(i, src);
    }
    if (transposed) std::swap(out.u, out.v);
    return out;
}

// ---------------------------------------------------------------------------
// symmetric Jacobi eigendecomposition
// ---------------------------------------------------------------------------

SymEig sym_eig(const Matrix& S) {
    if (!S.square()) raise(ErrorCode::ValidationError, "sym_eig needs a square matrix");
    const int n = S.rows;
    Matrix A = S;
    Matrix V = Matrix::identity(n);
    const double total = frobenius_norm(A);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(off) <= 1e-14 * std::max(total, 1e-300)) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double tt =
                    std::copysign(1.0, tau) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + tt * tt);
                const double s = tt * c;
                const double app = A(p, p), aqq = A(q, q);
                A(p, p) = app - tt * apq;
                A(q, q) = aqq + tt * apq;
                A(p, q) = A(q, p) = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = A(i, p), aiq = A(i, q);
                    A(i, p) = A(p, i) = c * aip - s * aiq;
                    A(i, q) = A(q, i) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = V(i, p), viq = V(i, q);
                    V(i, p) = c * vip - s * viq;
                    V(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    SymEig out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = A(i, i);
    out.vectors = V;
    return out;
}

Matrix pinv_sym(const Matrix& S, double rel_cutoff) {
    const SymEig e = sym_eig(S);
    const int n = S.rows;
    double vmax = 0.0;
    for (double v : e.values) vmax = std::max(vmax, std::fabs(v));
    Matrix out(n, n, 0.0);
    for (int k = 0; k < n; ++k) {
        if (std::fabs(e.values[k]) <= rel_cutoff * std::max(vmax, 1e-300)) continue;
        const double inv = 1.0 / e.values[k];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(i, j) += inv * e.vectors(i, k) * e.vectors(j, k);
    }
    return out;
}

}  // namespace ergo
