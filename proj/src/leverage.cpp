#include "sketchreg/leverage.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sketchreg {
namespace {

Vector row_norms2(const DenseMatrix& q) {
    Vector s(q.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) s[i] = kernels::dot(q.row(i).data(), q.row(i).data(), q.cols());
    return s;
}

Vector normalized(const Vector& v) {
    double sum = 0.0;
    for (double e : v) sum += e;
    Vector p(v);
    if (sum > 0.0)
        for (double& e : p) e /= sum;
    return p;
}

} // namespace

LeverageEstimate exact_leverage(const DenseMatrix& a) {
    require(a.rows() >= a.cols(), ErrorCode::DimensionMismatch, "exact_leverage needs rows >= cols");
    LeverageEstimate est;
    QrFactors f = qr_factor(a);
    est.scores = r_rank_deficient(f.r) ? row_norms2(jacobi_svd(a).u) : row_norms2(f.q);
    return est;
}

SketchOperator default_leverage_proj(std::size_t m, std::size_t n, SeedSpec seed) {
    const std::size_t cw = (n * n + 3) / 4;
    if (cw >= 10 * n) return SketchOperator::make(SketchVariant::countsketch, cw, m, seed);
    return SketchOperator::make(SketchVariant::gaussian, std::min(10 * n, std::max(m, n)), m, seed);
}

std::size_t default_r2(std::size_t m) {
    return static_cast<std::size_t>(std::ceil(8.0 * std::log(static_cast<double>(std::max<std::size_t>(m, 2)))));
}

LeverageEstimate approx_leverage(RowBlockStream& a, const SketchOperator& proj1, std::size_t r2, double gamma,
                                 CostLedger* ledger, bool pinv_fallback) {
    require(!is_l1_variant(proj1.variant), ErrorCode::InvalidArgument, "approx_leverage needs an l2 projection");
    require(r2 >= 1, ErrorCode::InvalidArgument, "approx_leverage needs r2 >= 1");
    require(gamma > 0.0 && gamma < 1.0, ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
    const std::size_t n = a.cols();
    const DenseMatrix pa = apply(proj1, a, ledger);
    // M = R^-1 Pi2 (n x r2), or R^-1 when the projection would not save work.
    DenseMatrix rinv;
    const QrFactors f = pa.rows() >= n ? qr_factor(pa, false) : QrFactors{};
    if (pa.rows() >= n && !r_rank_deficient(f.r)) {
        rinv = upper_inverse(f.r);
    } else {
        require(pinv_fallback, ErrorCode::RankDeficient, "projected matrix lost rank; increase c1");
        const SvdFactors svd = jacobi_svd(pa);
        rinv = DenseMatrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < svd.sigma.size(); ++k) rinv(i, k) = svd.v(i, k) / svd.sigma[k];
    }
    DenseMatrix mmat;
    const bool project = r2 < n;
    if (project) {
        DenseMatrix pi2(n, r2);
        RandomStream(derive_stream(proj1.seed, 0x5ec0dULL)).fill_normal(pi2.storage());
        kernels::scal(1.0 / std::sqrt(static_cast<double>(r2)), pi2.data(), pi2.size());
        mmat = multiply(rinv, pi2);
    } else {
        mmat = std::move(rinv);
    }
    const std::size_t k = mmat.cols();
    LeverageEstimate est;
    est.scores.assign(a.rows(), 0.0);
    a.for_each_block(ledger, [&](const RowBlock& b) {
        std::vector<double> y(b.rows * k, 0.0);
        kernels::gemm_nn(b.rows, k, n, b.data, n, mmat.data(), k, y.data(), k);
        for (std::size_t i = 0; i < b.rows; ++i)
            est.scores[b.row0 + i] = kernels::dot(y.data() + i * k, y.data() + i * k, k);
    });
    est.method = LeverageMethod::approx;
    est.beta = (1.0 - gamma) / (1.0 + gamma);
    est.proj1 = proj1.variant;
    est.c1 = proj1.s;
    est.r2 = project ? r2 : 0;
    return est;
}

LeverageQuality leverage_quality(const LeverageEstimate& exact, const LeverageEstimate& approx, double tol) {
    require(exact.scores.size() == approx.scores.size(), ErrorCode::DimensionMismatch,
            "leverage_quality: score vectors differ in length");
    const Vector p = normalized(exact.scores);
    const Vector q = normalized(approx.scores);
    LeverageQuality out;
    out.rel_err = relative_error(q, p);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    double al = -HUGE_VAL, bl = HUGE_VAL, as = -HUGE_VAL, bs = HUGE_VAL;
    bool any_l = false, any_s = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) out.kl += q[i] > 0.0 ? p[i] * std::log(p[i] / q[i]) : HUGE_VAL;
        if (p[i] == 0.0) continue;
        const double r = q[i] / p[i];
        if (exact.scores[i] >= 1.0 - tol) {
            any_l = true;
            al = std::max(al, r);
            bl = std::min(bl, r);
        } else {
            any_s = true;
            as = std::max(as, r);
            bs = std::min(bs, r);
        }
    }
    out.alpha_l = any_l ? al : nan;
    out.beta_l = any_l ? bl : nan;
    out.alpha_s = any_s ? as : nan;
    out.beta_s = any_s ? bs : nan;
    return out;
}

} // namespace sketchreg
