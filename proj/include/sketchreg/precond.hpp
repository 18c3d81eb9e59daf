#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/random.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>

// Right preconditioners N built from sketches: R^-1 from a QR of the sketch,
// or V Sigma^-1 from its SVD (LSRN).
namespace sketchreg {

enum class PrecondKind { qr, svd };

struct Preconditioner {
    PrecondKind kind = PrecondKind::qr;
    DenseMatrix factor;  // qr: upper-triangular R (N = R^-1); svd: N itself
    std::string source;  // description of the sketch it came from
    std::optional<std::pair<double, double>> predicted_interval; // bounds on sigma(A N)

    std::size_t dim() const noexcept { return factor.cols(); }
    /// N y.
    Vector apply(std::span<const double> y) const;
    /// N^T z.
    Vector apply_t(std::span<const double> z) const;
    /// Explicit N.
    DenseMatrix n_matrix() const;
    /// M N for an explicit M with dim() columns.
    DenseMatrix right_multiply(const DenseMatrix& m) const;
};

/// N = R^-1 from the QR of a sketch Phi A. Throws RankDeficient.
Preconditioner qr_precond(const DenseMatrix& sketch_of_a, std::string source = "sketch");

/// LSRN: s = ceil(gamma n), G unscaled Gaussian, N = V Sigma^-1 from the SVD of
/// G A. predicted_interval = [1/(sqrt s + sqrt n + t), 1/(sqrt s - sqrt n - t)]
/// with t = sqrt(2 ln(2/delta)); the upper end is +inf when the denominator is
/// not positive. One pass. Throws RankDeficient.
Preconditioner lsrn_precond(RowBlockStream& a, double gamma, SeedSpec seed, double delta = 0.01,
                            CostLedger* ledger = nullptr);

/// cond2(A N).
double precond_quality(const DenseMatrix& a, const Preconditioner& p);
/// cond2(R_A N) for the triangular factor R_A of A; equals cond2(A N).
double precond_quality_from_r(const DenseMatrix& r_a, const Preconditioner& p);

} // namespace sketchreg
