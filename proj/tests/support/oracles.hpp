#pragma once

// Independent verification routines used only by tests. Deliberately written
// with different algorithms than the library paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ergo/linalg.hpp"

namespace oracle {

using ergo::Matrix;
using ergo::Vector;

// Singular values via two-sided cyclic Jacobi on the Gram matrix M^T M.
// (The library computes spectral norms by power iteration and its SVD by
// one-sided Jacobi on columns; this route shares neither.)
inline Vector singular_values(const Matrix& M) {
    const int n = M.cols;
    Matrix G(n, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < M.rows; ++k) s += M(k, i) * M(k, j);
            G(i, j) = s;
        }
    // cyclic Jacobi sweeps on the symmetric Gram matrix
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::fabs(G(p, q)));
        if (off < 1e-14 * (1.0 + std::fabs(G(0, 0)))) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(G(p, q)) < 1e-300) continue;
                const double phi = 0.5 * std::atan2(2.0 * G(p, q), G(q, q) - G(p, p));
                const double c = std::cos(phi), s = std::sin(phi);
                for (int k = 0; k < n; ++k) {
                    const double gkp = G(k, p), gkq = G(k, q);
                    G(k, p) = c * gkp - s * gkq;
                    G(k, q) = s * gkp + c * gkq;
                }
                for (int k = 0; k < n; ++k) {
                    const double gpk = G(p, k), gqk = G(q, k);
                    G(p, k) = c * gpk - s * gqk;
                    G(q, k) = s * gpk + c * gqk;
                }
            }
    }
    Vector sv(n);
    for (int i = 0; i < n; ++i) sv[i] = std::sqrt(std::max(G(i, i), 0.0));
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

// ---------------------------------------------------------------------------
// chi-squared upper tail by adaptive Simpson quadrature of the density
// ---------------------------------------------------------------------------

inline double chi2_pdf(double x, int dof) {
    if (x <= 0.0) return 0.0;
    const double a = 0.5 * dof;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

inline double simpson(double (*f)(double, int), int dof, double a, double b) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a, dof) + 4.0 * f(m, dof) + f(b, dof));
}

inline double adaptive_simpson(double (*f)(double, int), int dof, double a, double b, double whole,
                               double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, dof, a, m);
    const double right = simpson(f, dof, m, b);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, dof, a, m, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, dof, m, b, right, 0.5 * eps, depth - 1);
}

inline double chi2_survival_quadrature(double x, int dof) {
    if (x <= 0.0) return 1.0;
    // integrate the density from x to a point where the tail is negligible
    const double cutoff = std::max(x, static_cast<double>(dof)) + 60.0 * std::sqrt(2.0 * dof) + 60.0;
    double total = 0.0;
    const int pieces = 64;
    for (int i = 0; i < pieces; ++i) {
        const double a = x + (cutoff - x) * i / pieces;
        const double b = x + (cutoff - x) * (i + 1) / pieces;
        total += adaptive_simpson(chi2_pdf, dof, a, b, simpson(chi2_pdf, dof, a, b), 1e-13, 40);
    }
    return total;
}

// ---------------------------------------------------------------------------
// constrained quadratic minimization over a plane by grid refinement
// ---------------------------------------------------------------------------

// orthonormal basis of the complement of `normal`
inline std::vector<Vector> plane_basis(const Vector& normal) {
    const int d = static_cast<int>(normal.size());
    std::vector<Vector> basis;
    for (int axis = 0; axis < d && static_cast<int>(basis.size()) < d - 1; ++axis) {
        Vector v(d, 0.0);
        v[axis] = 1.0;
        double vn = ergo::dot(v, normal);
        for (int i = 0; i < d; ++i) v[i] -= vn * normal[i];
        for (const Vector& b : basis) {
            const double vb = ergo::dot(v, b);
            for (int i = 0; i < d; ++i) v[i] -= vb * b[i];
        }
        const double nv = ergo::norm2(v);
        if (nv < 1e-8) continue;
        for (double& x : v) x /= nv;
        basis.push_back(std::move(v));
    }
    return basis;
}

// min over mu on the plane {plane_point + span(basis)} of
// (p - mu)^T sigma_inv (p - mu), refined grid search
inline double plane_min_distance(const Vector& p, const Matrix& sigma_inv,
                                 const Vector& plane_point, const Vector& normal) {
    const auto basis = plane_basis(normal);
    const int k = static_cast<int>(basis.size());
    const int d = static_cast<int>(p.size());
    Vector center(k, 0.0);
    for (int i = 0; i < k; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += basis[i][j] * (p[j] - plane_point[j]);
        center[i] = s;
    }
    double width = 1.0;
    {
        Vector diff(d);
        for (int j = 0; j < d; ++j) diff[j] = p[j] - plane_point[j];
        width = 4.0 * ergo::norm2(diff) + 1.0;
    }
    auto eval = [&](const Vector& y) {
        Vector mu = plane_point;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) mu[j] += y[i] * basis[i][j];
        Vector diff(d);
        for (int j = 0; j < d; ++j) diff[j] = p[j] - mu[j];
        return ergo::dot(diff, ergo::mul(sigma_inv, diff));
    };
    double best = eval(center);
    Vector best_y = center;
    const int steps = 17;  // per dimension per level
    for (int level = 0; level < 36; ++level) {
        Vector y(k);
        std::vector<int> idx(k, 0);
        bool done = false;
        while (!done) {
            for (int i = 0; i < k; ++i)
                y[i] = best_y[i] + width * (2.0 * idx[i] / (steps - 1) - 1.0);
            const double v = eval(y);
            if (v < best) {
                best = v;
                best_y = y;
            }
            int c = 0;
            while (c < k && ++idx[c] == steps) idx[c++] = 0;
            done = c == k;
        }
        width *= 0.5;
    }
    return best;
}

// ---------------------------------------------------------------------------
// statistics helpers
// ---------------------------------------------------------------------------

// Kolmogorov-Smirnov statistic against U[0, 1]
inline double ks_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        d = std::max(d, std::fabs(samples[i] - (i + 1) / n));
        d = std::max(d, std::fabs(samples[i] - i / n));
    }
    return d;
}

// one-sided paired test (H1: mean of diffs < 0), normal approximation
inline double paired_p_value_less(const std::vector<double>& diffs) {
    const double n = static_cast<double>(diffs.size());
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= n;
    double var = 0.0;
    for (double d : diffs) var += (d - mean) * (d - mean);
    var /= (n - 1.0);
    const double se = std::sqrt(var / n);
    if (se == 0.0) return mean < 0.0 ? 0.0 : 1.0;
    const double z = mean / se;
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

}  // namespace oracle
