#pragma once

#include <vector>

#include "ergo/errors.hpp"
#include "ergo/rng.hpp"

namespace ergo {

using Vector = std::vector<double>;

// Dense row-major matrix. Small sizes throughout (region graphs have a
// handful of nodes, covariances are 2x2/3x3), so everything here is plain
// O(n^3) dense code with no blocking.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    static Matrix identity(int n);
    static Matrix diag(const Vector& d);

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    bool square() const { return rows == cols; }
};

// Central numeric tolerances. Everything tunable lives here.
namespace tol {
inline constexpr double solve_residual = 1e-9;      // relative residual promised by solve_linear
inline constexpr double spectral_rel = 1e-8;        // power-iteration relative tolerance
inline constexpr int spectral_max_iter = 10000;     // power-iteration cap
inline constexpr double eig_rel = 1e-8;             // eigenvalue moduli relative accuracy target
inline constexpr int eig_max_sweeps = 50;           // QR iterations per eigenvalue before giving up
inline constexpr double chi2_abs = 1e-10;           // chi-squared tail absolute error
inline constexpr double psd_pivot = -1e-10;         // Cholesky pivot below this is an error
inline constexpr double cov_regularize = 1e-9;      // added to covariance diagonals before inversion
inline constexpr double belief_clamp = 1e-12;       // keeps beliefs away from 0/1
inline constexpr double stationarity = 1e-6;        // |Pw - w| allowed before deflation refuses
inline constexpr double weight_floor = 1e-6;        // smallest stationary weight fed to the solvers
}  // namespace tol

// ---------------------------------------------------------------------------
// basic arithmetic
// ---------------------------------------------------------------------------

Matrix operator*(const Matrix& A, const Matrix& B);
Matrix operator+(const Matrix& A, const Matrix& B);
Matrix operator-(const Matrix& A, const Matrix& B);
Matrix transpose(const Matrix& A);
Matrix outer(const Vector& u, const Vector& v);
Vector mul(const Matrix& A, const Vector& x);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double max_abs(const Vector& a);
double frobenius_norm(const Matrix& A);
double max_abs(const Matrix& A);

// ---------------------------------------------------------------------------
// factorizations and solvers
// ---------------------------------------------------------------------------

// LU with partial pivoting plus iterative refinement.
// Throws SingularMatrix when elimination finds no usable pivot.
Vector solve_linear(const Matrix& A, const Vector& b);

Matrix inverse(const Matrix& A);

// Largest singular value via power iteration on M^T M with a deterministic
// start vector. Throws NonConvergence if the tolerance is not met in
// max_iter steps.
double spectral_norm(const Matrix& M, int max_iter = tol::spectral_max_iter,
                     double rel_tol = tol::spectral_rel);

// Moduli of all eigenvalues of a general square matrix, sorted descending.
// Householder reduction to Hessenberg form followed by Francis double-shift
// QR. Throws NonConvergence if a block fails to deflate.
Vector eigenvalue_moduli(const Matrix& M);

// Upper-tail probability P(chi^2_dof > x) via the regularized upper
// incomplete gamma function. Clamped to [0, 1].
double chi2_survival(double x, int dof);

// Lower-triangular factor of a symmetric PSD matrix. Semidefinite pivots are
// zeroed; a pivot below tol::psd_pivot throws NotPSD.
Matrix cholesky_psd(const Matrix& cov);

// mean + L z with z a standard normal draw from the stream.
Vector sample_gaussian(const Vector& mean, const Matrix& cov, RandomStream& rng);

// Full SVD (one-sided Jacobi), M = U diag(sigma) V^T with sigma descending.
// Solver machinery for the spectral-norm prox; power iteration stays the
// spectral_norm entry point.
struct Svd {
    Matrix u;
    Vector sigma;
    Matrix v;
};
Svd svd_full(const Matrix& M);

// Symmetric eigendecomposition via cyclic Jacobi rotations.
struct SymEig {
    Vector values;   // unsorted
    Matrix vectors;  // columns are eigenvectors
};
SymEig sym_eig(const Matrix& S);

// Moore-Penrose pseudoinverse of a symmetric PSD matrix (used for projector
// precomputation in the chain solvers).
Matrix pinv_sym(const Matrix& S, double rel_cutoff = 1e-12);

}  // namespace ergo
