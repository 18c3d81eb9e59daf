#include "sketchreg/precond.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/sketch.hpp"

#include <cmath>
#include <limits>

namespace sketchreg {

Vector Preconditioner::apply(std::span<const double> y) const {
    return kind == PrecondKind::qr ? solve_upper(factor, y) : matvec(factor, y);
}

Vector Preconditioner::apply_t(std::span<const double> z) const {
    return kind == PrecondKind::qr ? solve_upper_t(factor, z) : matvec_t(factor, z);
}

DenseMatrix Preconditioner::n_matrix() const {
    return kind == PrecondKind::qr ? upper_inverse(factor) : factor;
}

DenseMatrix Preconditioner::right_multiply(const DenseMatrix& m) const {
    require(m.cols() == dim(), ErrorCode::DimensionMismatch, "right_multiply: column count");
    return multiply(m, n_matrix());
}

Preconditioner qr_precond(const DenseMatrix& sketch_of_a, std::string source) {
    require(sketch_of_a.rows() >= sketch_of_a.cols(), ErrorCode::RankDeficient,
            "sketch has fewer rows than columns; increase s");
    require(sketch_of_a.all_finite(), ErrorCode::InvalidArgument, "sketch has non-finite entries");
    Preconditioner p;
    p.kind = PrecondKind::qr;
    p.factor = qr_factor(sketch_of_a, false).r;
    require(!r_rank_deficient(p.factor), ErrorCode::RankDeficient, "sketch is rank deficient; increase s");
    p.source = std::move(source);
    return p;
}

Preconditioner lsrn_precond(RowBlockStream& a, double gamma, SeedSpec seed, double delta, CostLedger* ledger) {
    require(gamma > 1.0, ErrorCode::InvalidArgument, "lsrn_precond needs gamma > 1");
    require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    const std::size_t n = a.cols();
    const std::size_t s = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
    const SketchOperator op = SketchOperator::make(SketchVariant::gaussian, s, a.rows(), seed);
    // The operator is scaled by s^-1/2; the unscaled G A is sqrt(s) times it.
    const DenseMatrix ga = apply(op, a, ledger);
    const SvdFactors svd = jacobi_svd(ga);
    require(svd.sigma.size() == n, ErrorCode::RankDeficient, "G A is rank deficient");
    const double sd = static_cast<double>(s);
    const double rs = std::sqrt(sd);
    Preconditioner p;
    p.kind = PrecondKind::svd;
    p.factor = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) p.factor(i, k) = svd.v(i, k) / (rs * svd.sigma[k]);
    const double t = std::sqrt(2.0 * std::log(2.0 / delta));
    const double rn = std::sqrt(static_cast<double>(n));
    const double lo = 1.0 / (rs + rn + t);
    const double den = rs - rn - t;
    p.predicted_interval = {lo, den > 0.0 ? 1.0 / den : std::numeric_limits<double>::infinity()};
    p.source = "lsrn gaussian s=" + std::to_string(s);
    return p;
}

double precond_quality(const DenseMatrix& a, const Preconditioner& p) {
    return cond2(p.right_multiply(a));
}

double precond_quality_from_r(const DenseMatrix& r_a, const Preconditioner& p) {
    return cond2(p.right_multiply(r_a));
}

} // namespace sketchreg
