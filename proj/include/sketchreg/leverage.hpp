#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/sketch.hpp"

#include <cstddef>

// Statistical leverage scores: exact (squared row norms of an orthonormal
// basis) and sketch-based approximations, plus quality metrics.
namespace sketchreg {

enum class LeverageMethod { exact, approx };

struct LeverageEstimate {
    Vector scores;
    double beta = 1.0; // guaranteed misestimation factor, 1 for exact
    LeverageMethod method = LeverageMethod::exact;
    SketchVariant proj1 = SketchVariant::countsketch;
    std::size_t c1 = 0;
    std::size_t r2 = 0; // 0 when the second projection was skipped
};

/// Squared row norms of Q from Householder QR; SVD basis on rank deficiency.
LeverageEstimate exact_leverage(const DenseMatrix& a);

/// Default first projection: CountSketch with c1 = n^2/4, or Gaussian with
/// c1 = 10 n when n^2/4 < 10 n.
SketchOperator default_leverage_proj(std::size_t m, std::size_t n, SeedSpec seed);
/// ceil(8 ln m).
std::size_t default_r2(std::size_t m);

/// Two passes: R from QR of Pi1 A, then scores_i = ||a_i R^-1 Pi2||^2 with Pi2
/// an n x r2 Gaussian scaled by r2^-1/2. When r2 >= n the norms of a_i R^-1 are
/// computed directly. beta = (1 - gamma) / (1 + gamma). Throws RankDeficient
/// unless `pinv_fallback` is set, in which case a rank-deficient Pi1 A is
/// replaced by its truncated SVD (R^-1 becomes V_r Sigma_r^-1).
LeverageEstimate approx_leverage(RowBlockStream& a, const SketchOperator& proj1, std::size_t r2,
                                 double gamma = 0.5, CostLedger* ledger = nullptr, bool pinv_fallback = false);

struct LeverageQuality {
    double rel_err = 0.0; // ||p_hat - p*|| / ||p*|| on normalized scores
    double kl = 0.0;      // sum p* ln(p* / p_hat), rows with p* = 0 skipped
    // Extremes of p_hat / p* over L = {exact score = 1} and S = the rest; NaN if empty.
    double alpha_l = 0.0, beta_l = 0.0, alpha_s = 0.0, beta_s = 0.0;
};

/// Rows with exact score >= 1 - tol belong to L.
LeverageQuality leverage_quality(const LeverageEstimate& exact, const LeverageEstimate& approx,
                                 double tol = 1e-8);

} // namespace sketchreg
