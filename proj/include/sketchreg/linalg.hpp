#pragma once

#include "sketchreg/matrix.hpp"

#include <cstdint>
#include <span>

// Dense factorizations and solves. QR is blocked Householder; the SVD is
// one-sided Jacobi applied to the R factor of a preliminary QR.
namespace sketchreg {

/// Relative rank threshold shared by QR and SVD.
inline constexpr double kRankTol = 1e-12;

struct QrFactors {
    DenseMatrix q; // m x n, orthonormal columns (empty when not requested)
    DenseMatrix r; // n x n upper triangular, diagonal >= 0
};

struct SvdFactors {
    DenseMatrix u; // m x r
    Vector sigma;  // r values, nonincreasing
    DenseMatrix v; // n x r
};

/// Thin QR of a (rows >= cols) without a rank check.
QrFactors qr_factor(const DenseMatrix& a, bool form_q = true);
/// Thin QR; throws RankDeficient when min |R_ii| < 1e-12 max |R_ii|.
QrFactors householder_qr(const DenseMatrix& a);
/// True when the R factor fails the relative diagonal test.
bool r_rank_deficient(const DenseMatrix& r);

/// Compact SVD truncated at rank threshold 1e-12 * sigma_0. Throws NoConvergence.
SvdFactors jacobi_svd(const DenseMatrix& a);
/// All min(rows, cols) singular values, nonincreasing (no truncation).
Vector singular_values(const DenseMatrix& a);

/// Minimum-length least-squares solution A^+ b.
Vector min_length_solve(const DenseMatrix& a, std::span<const double> b);
/// Solution via Cholesky of A^T A. Throws IllConditioned if the factorization fails.
Vector normal_eq_solve(const DenseMatrix& a, std::span<const double> b);
/// sigma_max / sigma_min; +infinity when rank-deficient at the 1e-12 threshold.
double cond2(const DenseMatrix& a);

struct KappaBarEstimate {
    double alpha = 0.0;      // elementwise l_p norm of A
    double beta_lower = 0.0; // certified lower bound on the best beta
    bool estimate = true;    // alpha * beta_lower is a lower bound, not the exact value
    double value() const noexcept { return alpha * beta_lower; }
};

/// (alpha, beta) conditioning of A in the l_p norm. Probes are unit vectors
/// first, then seeded Gaussian directions.
KappaBarEstimate kappa_bar_p(const DenseMatrix& a, double p, std::size_t probes,
                             std::uint64_t seed = 0);

/// Elementwise l_p norm of a vector.
double norm_p(std::span<const double> x, double p);

/// Solves R x = b for upper-triangular R.
Vector solve_upper(const DenseMatrix& r, std::span<const double> b);
/// Solves R^T x = b for upper-triangular R.
Vector solve_upper_t(const DenseMatrix& r, std::span<const double> b);
/// Inverse of a nonsingular upper-triangular matrix.
DenseMatrix upper_inverse(const DenseMatrix& r);
/// Lower Cholesky factor L with G = L L^T. Throws IllConditioned when G is not
/// numerically positive definite.
DenseMatrix cholesky(const DenseMatrix& g);

} // namespace sketchreg
