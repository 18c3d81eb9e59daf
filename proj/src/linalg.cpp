#include "sketchreg/linalg.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "sketchreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sketchreg {
namespace {

constexpr std::size_t kPanel = 32;
constexpr int kMaxSweeps = 60;

// Unblocked Householder factorization of a rows x nb panel stored row-major
// with stride nb. On return the upper triangle holds R, the strict lower part
// holds the reflector tails (unit leading entry implied), and tau the scalars.
void factor_panel(double* p, std::size_t rows, std::size_t nb, double* tau) {
    Vector x(rows);
    Vector w(nb);
    for (std::size_t j = 0; j < nb && j < rows; ++j) {
        const std::size_t len = rows - j;
        for (std::size_t i = 0; i < len; ++i) x[i] = p[(j + i) * nb + j];
        const double alpha = x[0];
        const double sigma = len > 1 ? norm2(std::span<const double>(x.data() + 1, len - 1)) : 0.0;
        if (sigma == 0.0) {
            tau[j] = 0.0;
            continue;
        }
        const double beta = -std::copysign(std::hypot(alpha, sigma), alpha);
        tau[j] = (beta - alpha) / beta;
        const double scale = 1.0 / (alpha - beta);
        p[j * nb + j] = beta;
        for (std::size_t i = 1; i < len; ++i) p[(j + i) * nb + j] = x[i] * scale;
        const std::size_t nc = nb - j - 1;
        if (nc == 0) continue;
        // w = v^T P[j:, j+1:], then P[j:, j+1:] -= tau v w^T.
        std::copy_n(p + j * nb + j + 1, nc, w.data());
        for (std::size_t i = j + 1; i < rows; ++i)
            kernels::axpy(p[i * nb + j], p + i * nb + j + 1, w.data(), nc);
        kernels::axpy(-tau[j], w.data(), p + j * nb + j + 1, nc);
        for (std::size_t i = j + 1; i < rows; ++i)
            kernels::axpy(-tau[j] * p[i * nb + j], w.data(), p + i * nb + j + 1, nc);
    }
}

// Explicit V (rows x nb, unit diagonal, zero above) from a factored panel.
void extract_v(const double* p, std::size_t rows, std::size_t nb, double* v) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < nb; ++j)
            v[i * nb + j] = i > j ? p[i * nb + j] : (i == j ? 1.0 : 0.0);
}

// Upper-triangular T with H_1 ... H_nb = I - V T V^T (forward, columnwise).
void build_t(const double* v, std::size_t rows, std::size_t nb, const double* tau, double* t) {
    Vector g(nb * nb, 0.0);
    kernels::gemm_tn(nb, nb, rows, v, nb, v, nb, g.data(), nb);
    std::fill_n(t, nb * nb, 0.0);
    for (std::size_t i = 0; i < nb; ++i) {
        t[i * nb + i] = tau[i];
        for (std::size_t r = 0; r < i; ++r) {
            double s = 0.0;
            for (std::size_t c = r; c < i; ++c) s += t[r * nb + c] * g[c * nb + i];
            t[r * nb + i] = -tau[i] * s;
        }
    }
}

// C (rows x nc, stride ldc) <- (I - V op(T) V^T) C with op(T) = T or T^T.
void apply_block_reflector(const double* v, const double* t, std::size_t rows, std::size_t nb,
                           bool transpose_t, double* c, std::size_t nc, std::size_t ldc) {
    if (nc == 0) return;
    Vector w(nb * nc, 0.0);
    kernels::gemm_tn(nb, nc, rows, v, nb, c, ldc, w.data(), nc);
    Vector w2(nb * nc, 0.0);
    if (transpose_t)
        kernels::gemm_tn(nb, nc, nb, t, nb, w.data(), nc, w2.data(), nc);
    else
        kernels::gemm_nn(nb, nc, nb, t, nb, w.data(), nc, w2.data(), nc);
    for (double& x : w2) x = -x;
    kernels::gemm_nn(rows, nc, nb, v, nb, w2.data(), nc, c, ldc);
}

struct PanelFactors {
    std::size_t j0;
    std::size_t nb;
    Vector v;
    Vector t;
};

// One-sided Jacobi on the rows of `cols` (each row is one column of the
// matrix being orthogonalized). Rotations are mirrored into `vrows` if given.
void jacobi_rows(DenseMatrix& cols, DenseMatrix* vrows) {
    const std::size_t n = cols.rows();
    const std::size_t len = cols.cols();
    Vector norms(n);
    const double tol = std::max(1e-15, std::sqrt(static_cast<double>(len)) * std::numeric_limits<double>::epsilon());
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (std::size_t j = 0; j < n; ++j) norms[j] = kernels::dot(cols.row(j).data(), cols.row(j).data(), len);
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                const double gamma = kernels::dot(cols.row(p).data(), cols.row(q).data(), len);
                if (std::fabs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                kernels::rot(cols.row(p).data(), cols.row(q).data(), len, c, s);
                if (vrows) kernels::rot(vrows->row(p).data(), vrows->row(q).data(), vrows->cols(), c, s);
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if (!rotated) return;
    }
    fail(ErrorCode::NoConvergence, "Jacobi SVD did not converge in " + std::to_string(kMaxSweeps) + " sweeps");
}

SvdFactors svd_tall(const DenseMatrix& a) {
    const std::size_t n = a.cols();
    QrFactors qr = qr_factor(a, true);
    DenseMatrix cols = qr.r.transposed(); // row j = column j of R
    DenseMatrix vrows = DenseMatrix::identity(n);
    jacobi_rows(cols, &vrows);
    Vector sig(n);
    for (std::size_t j = 0; j < n; ++j) sig[j] = norm2(cols.row(j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });
    const double s0 = n ? sig[order[0]] : 0.0;
    std::size_t r = 0;
    while (r < n && sig[order[r]] > kRankTol * s0 && sig[order[r]] > 0.0) ++r;
    // U_R (n x r) and V (n x r).
    DenseMatrix ur(n, r);
    SvdFactors out{DenseMatrix(), Vector(r), DenseMatrix(n, r)};
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = sig[j];
        for (std::size_t i = 0; i < n; ++i) {
            ur(i, k) = cols(j, i) / sig[j];
            out.v(i, k) = vrows(j, i);
        }
    }
    out.u = multiply(qr.q, ur);
    return out;
}

} // namespace

QrFactors qr_factor(const DenseMatrix& a, bool form_q) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    require(m >= n, ErrorCode::DimensionMismatch, "QR needs rows >= cols");
    DenseMatrix w = a;
    Vector tau(n, 0.0);
    std::vector<PanelFactors> panels;
    for (std::size_t j0 = 0; j0 < n; j0 += kPanel) {
        const std::size_t nb = std::min(kPanel, n - j0);
        const std::size_t rows = m - j0;
        Vector p(rows * nb);
        for (std::size_t i = 0; i < rows; ++i) std::copy_n(w.data() + (j0 + i) * n + j0, nb, p.data() + i * nb);
        factor_panel(p.data(), rows, nb, tau.data() + j0);
        for (std::size_t i = 0; i < rows; ++i) std::copy_n(p.data() + i * nb, nb, w.data() + (j0 + i) * n + j0);
        PanelFactors pf{j0, nb, Vector(rows * nb), Vector(nb * nb)};
        extract_v(p.data(), rows, nb, pf.v.data());
        build_t(pf.v.data(), rows, nb, tau.data() + j0, pf.t.data());
        apply_block_reflector(pf.v.data(), pf.t.data(), rows, nb, true, w.data() + j0 * n + j0 + nb,
                              n - j0 - nb, n);
        if (form_q) panels.push_back(std::move(pf));
    }
    QrFactors out;
    out.r = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) out.r(i, j) = w(i, j);
    std::vector<bool> flip(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (out.r(i, i) < 0.0) {
            flip[i] = true;
            for (std::size_t j = i; j < n; ++j) out.r(i, j) = -out.r(i, j);
        }
    }
    if (form_q) {
        out.q = DenseMatrix(m, n);
        for (std::size_t i = 0; i < n; ++i) out.q(i, i) = 1.0;
        for (auto it = panels.rbegin(); it != panels.rend(); ++it) {
            const std::size_t j0 = it->j0;
            apply_block_reflector(it->v.data(), it->t.data(), m - j0, it->nb, false, out.q.data() + j0 * n + j0,
                                  n - j0, n);
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (flip[j]) out.q(i, j) = -out.q(i, j);
    }
    return out;
}

bool r_rank_deficient(const DenseMatrix& r) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < r.rows(); ++i) {
        lo = std::min(lo, std::fabs(r(i, i)));
        hi = std::max(hi, std::fabs(r(i, i)));
    }
    return r.rows() > 0 && (hi == 0.0 || lo < kRankTol * hi);
}

QrFactors householder_qr(const DenseMatrix& a) {
    require(a.all_finite(), ErrorCode::InvalidArgument, "QR input has non-finite entries");
    QrFactors f = qr_factor(a, true);
    require(!r_rank_deficient(f.r), ErrorCode::RankDeficient, "R has a negligible diagonal entry");
    return f;
}

SvdFactors jacobi_svd(const DenseMatrix& a) {
    if (a.rows() >= a.cols()) return svd_tall(a);
    SvdFactors t = svd_tall(a.transposed());
    return SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

Vector singular_values(const DenseMatrix& a) {
    if (a.rows() < a.cols()) return singular_values(a.transposed());
    QrFactors qr = qr_factor(a, false);
    DenseMatrix cols = qr.r.transposed();
    jacobi_rows(cols, nullptr);
    Vector sig(cols.rows());
    for (std::size_t j = 0; j < sig.size(); ++j) sig[j] = norm2(cols.row(j));
    std::sort(sig.begin(), sig.end(), std::greater<>());
    return sig;
}

Vector min_length_solve(const DenseMatrix& a, std::span<const double> b) {
    require(a.rows() == b.size(), ErrorCode::DimensionMismatch, "min_length_solve: size mismatch");
    const SvdFactors f = jacobi_svd(a);
    Vector c = matvec_t(f.u, b);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] /= f.sigma[k];
    return matvec(f.v, c);
}

DenseMatrix cholesky(const DenseMatrix& g) {
    const std::size_t n = g.rows();
    require(g.cols() == n, ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = g(j, j) - kernels::dot(l.row(j).data(), l.row(j).data(), j);
        if (!(d > 0.0) || !std::isfinite(d)) fail(ErrorCode::IllConditioned, "Cholesky pivot not positive");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i)
            l(i, j) = (g(i, j) - kernels::dot(l.row(i).data(), l.row(j).data(), j)) / ljj;
    }
    return l;
}

Vector normal_eq_solve(const DenseMatrix& a, std::span<const double> b) {
    require(a.rows() == b.size(), ErrorCode::DimensionMismatch, "normal_eq_solve: size mismatch");
    const DenseMatrix l = cholesky(multiply_tn(a, a));
    // L L^T x = A^T b, with R = L^T upper triangular.
    const DenseMatrix r = l.transposed();
    return solve_upper(r, solve_upper_t(r, matvec_t(a, b)));
}

double cond2(const DenseMatrix& a) {
    const Vector s = singular_values(a);
    if (s.empty() || s.front() == 0.0) return std::numeric_limits<double>::infinity();
    if (s.back() <= kRankTol * s.front()) return std::numeric_limits<double>::infinity();
    return s.front() / s.back();
}

double norm_p(std::span<const double> x, double p) {
    if (p == 1.0) return norm1(x);
    if (p == 2.0) return norm2(x);
    if (std::isinf(p)) return norm_inf(x);
    double s = 0.0;
    for (double v : x) s += std::pow(std::fabs(v), p);
    return std::pow(s, 1.0 / p);
}

KappaBarEstimate kappa_bar_p(const DenseMatrix& a, double p, std::size_t probes, std::uint64_t seed) {
    require(p >= 1.0, ErrorCode::InvalidArgument, "kappa_bar_p needs p >= 1");
    require(probes >= 1, ErrorCode::InvalidArgument, "kappa_bar_p needs at least one probe");
    const double q = p == 1.0 ? std::numeric_limits<double>::infinity() : p / (p - 1.0);
    KappaBarEstimate est;
    est.alpha = norm_p(a.values(), p);
    const std::size_t n = a.cols();
    RandomStream rs(derive_stream(seed, 0));
    Vector z(n);
    for (std::size_t k = 0; k < probes; ++k) {
        if (k < n) {
            std::fill(z.begin(), z.end(), 0.0);
            z[k] = 1.0;
        } else {
            rs.fill_normal(z);
        }
        const double az = norm_p(matvec(a, z), p);
        const double ratio = az > 0.0 ? norm_p(z, q) / az : std::numeric_limits<double>::infinity();
        est.beta_lower = std::max(est.beta_lower, ratio);
    }
    return est;
}

Vector solve_upper(const DenseMatrix& r, std::span<const double> b) {
    const std::size_t n = r.rows();
    require(r.cols() == n && b.size() == n, ErrorCode::DimensionMismatch, "solve_upper: size mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t ii = n; ii-- > 0;) {
        const double s = kernels::dot(r.row(ii).data() + ii + 1, x.data() + ii + 1, n - ii - 1);
        x[ii] = (x[ii] - s) / r(ii, ii);
    }
    return x;
}

Vector solve_upper_t(const DenseMatrix& r, std::span<const double> b) {
    const std::size_t n = r.rows();
    require(r.cols() == n && b.size() == n, ErrorCode::DimensionMismatch, "solve_upper_t: size mismatch");
    Vector x(b.begin(), b.end());
    // Column-oriented forward substitution: R^T is lower triangular with rows of R as columns.
    for (std::size_t i = 0; i < n; ++i) {
        x[i] /= r(i, i);
        kernels::axpy(-x[i], r.row(i).data() + i + 1, x.data() + i + 1, n - i - 1);
    }
    return x;
}

DenseMatrix upper_inverse(const DenseMatrix& r) {
    const std::size_t n = r.rows();
    require(r.cols() == n, ErrorCode::DimensionMismatch, "upper_inverse needs a square matrix");
    // Row i of R^{-1} solves x R = e_i, i.e. R^T x^T = e_i.
    DenseMatrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        Vector e(n, 0.0);
        e[i] = 1.0;
        const Vector x = solve_upper_t(r, e);
        std::copy(x.begin(), x.end(), inv.row(i).data());
    }
    return inv;
}

} // namespace sketchreg
