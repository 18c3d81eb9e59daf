#include "sketchreg/l1core.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sketchreg {
namespace {

Vector residual(const DenseMatrix& a, std::span<const double> x, std::span<const double> b) {
    Vector r = matvec(a, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    return r;
}

Vector ls_solve(const DenseMatrix& a, std::span<const double> b) {
    const QrFactors f = householder_qr(a);
    return solve_upper(f.r, matvec_t(f.q, b));
}

// Cholesky of a normal matrix with a growing diagonal shift as a fallback;
// the IPM scaling becomes extreme near convergence.
DenseMatrix robust_cholesky(DenseMatrix g) {
    double top = 0.0;
    for (std::size_t j = 0; j < g.rows(); ++j) top = std::max(top, g(j, j));
    double shift = 0.0;
    for (int attempt = 0;; ++attempt) {
        try {
            return cholesky(g);
        } catch (const Error&) {
            if (attempt == 12) throw;
            const double next = shift == 0.0 ? 1e-14 * top : shift * 10.0;
            for (std::size_t j = 0; j < g.rows(); ++j) g(j, j) += next - shift;
            shift = next;
        }
    }
}

Vector chol_solve(const DenseMatrix& l, std::span<const double> rhs) {
    // L L^T x = rhs via R = L^T.
    const DenseMatrix r = l.transposed();
    return solve_upper(r, solve_upper_t(r, rhs));
}

double max_step(std::span<const double> v, std::span<const double> dv) {
    double step = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
    return step;
}

// Solves A_S x = b_S on n rows with the smallest residuals that are linearly
// independent. Returns an empty vector when no such set exists.
Vector purify(const DenseMatrix& a, std::span<const double> b, std::span<const double> r) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return std::abs(r[i]) < std::abs(r[j]); });
    std::vector<Vector> basis;
    DenseMatrix as(n, n);
    Vector bs(n);
    for (std::size_t idx : order) {
        if (basis.size() == n) break;
        Vector v(a.row(idx).begin(), a.row(idx).end());
        const double len = norm2(v);
        if (len == 0.0) continue;
        for (const Vector& q : basis) {
            const double c = dot(q, v);
            for (std::size_t j = 0; j < n; ++j) v[j] -= c * q[j];
        }
        const double rest = norm2(v);
        if (rest <= 1e-8 * len) continue;
        for (double& e : v) e /= rest;
        const std::size_t k = basis.size();
        std::copy(a.row(idx).begin(), a.row(idx).end(), as.row(k).begin());
        bs[k] = b[idx];
        basis.push_back(std::move(v));
    }
    if (basis.size() < n) return {};
    const QrFactors f = qr_factor(as);
    if (r_rank_deficient(f.r)) return {};
    return solve_upper(f.r, matvec_t(f.q, bs));
}

L1Result ipm_residual(const DenseMatrix& a, std::span<const double> b, double tol, std::size_t max_iters) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    L1Result out;
    Vector x = ls_solve(a, b);
    Vector r = residual(a, x, b);
    const double delta = std::max(0.1 * norm1(r) / static_cast<double>(m), 1e-8);
    // Constraint A x - u + v = b, so u - v = -r.
    Vector u(m), v(m), lam(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        u[i] = std::max(-r[i], 0.0) + delta;
        v[i] = std::max(r[i], 0.0) + delta;
    }
    const double bnorm = 1.0 + norm2(b);
    const double anorm = 1.0 + frobenius(a);
    const double md = static_cast<double>(m);

    Vector zp(m), zm(m), rp(m), d(m), g(m), w(m);
    Vector du(m), dv(m), dl(m), du_a(m), dv_a(m), dl_a(m);
    Vector dx;
    DenseMatrix scaled(m, n);
    for (std::size_t it = 0;; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            zp[i] = 1.0 + lam[i];
            zm[i] = 1.0 - lam[i];
        }
        const Vector ax = matvec(a, x);
        for (std::size_t i = 0; i < m; ++i) rp[i] = b[i] - ax[i] + u[i] - v[i];
        Vector rd = matvec_t(a, lam);
        for (double& e : rd) e = -e;
        const double pobj = std::accumulate(u.begin(), u.end(), 0.0) + std::accumulate(v.begin(), v.end(), 0.0);
        const double dobj = dot(b, lam);
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        const double mu = (dot(u, zp) + dot(v, zm)) / (2.0 * md);
        out.gap = gap;
        out.iterations = it;
        out.history.push_back(pobj);
        if (norm2(rp) / bnorm <= tol && norm2(rd) / anorm <= tol && gap <= tol) break;
        if (it == max_iters) fail(ErrorCode::MaxIters, "ipm_l1 did not converge in " + std::to_string(max_iters));

        for (std::size_t i = 0; i < m; ++i) d[i] = u[i] / zp[i] + v[i] / zm[i];
        for (std::size_t i = 0; i < m; ++i) {
            const double s = 1.0 / std::sqrt(d[i]);
            for (std::size_t j = 0; j < n; ++j) scaled(i, j) = a(i, j) * s;
        }
        const DenseMatrix l = robust_cholesky(multiply_tn(scaled, scaled));

        // Newton direction for complementarity targets r1 (u z+) and r2 (v z-).
        auto direction = [&](std::span<const double> r1, std::span<const double> r2, Vector& ddu, Vector& ddv,
                             Vector& ddl) {
            for (std::size_t i = 0; i < m; ++i) {
                g[i] = rp[i] + r1[i] / zp[i] - r2[i] / zm[i];
                w[i] = g[i] / d[i];
            }
            Vector rhs = matvec_t(a, w);
            for (std::size_t j = 0; j < n; ++j) rhs[j] -= rd[j];
            dx = chol_solve(l, rhs);
            const Vector adx = matvec(a, dx);
            for (std::size_t i = 0; i < m; ++i) {
                ddl[i] = (g[i] - adx[i]) / d[i];
                ddu[i] = (r1[i] - u[i] * ddl[i]) / zp[i];
                ddv[i] = (r2[i] + v[i] * ddl[i]) / zm[i];
            }
        };
        auto steps = [&](const Vector& ddu, const Vector& ddv, const Vector& ddl) {
            const double ap = std::min(max_step(u, ddu), max_step(v, ddv));
            Vector ndl(m);
            for (std::size_t i = 0; i < m; ++i) ndl[i] = -ddl[i];
            const double ad = std::min(max_step(zp, ddl), max_step(zm, ndl));
            return std::pair{ap, ad};
        };

        Vector r1(m), r2(m);
        for (std::size_t i = 0; i < m; ++i) {
            r1[i] = -u[i] * zp[i];
            r2[i] = -v[i] * zm[i];
        }
        direction(r1, r2, du_a, dv_a, dl_a);
        const auto [ap_a, ad_a] = steps(du_a, dv_a, dl_a);
        double mu_aff = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            mu_aff += (u[i] + ap_a * du_a[i]) * (zp[i] + ad_a * dl_a[i]) +
                      (v[i] + ap_a * dv_a[i]) * (zm[i] - ad_a * dl_a[i]);
        mu_aff /= 2.0 * md;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
        for (std::size_t i = 0; i < m; ++i) {
            r1[i] = sigma * mu - u[i] * zp[i] - du_a[i] * dl_a[i];
            r2[i] = sigma * mu - v[i] * zm[i] + dv_a[i] * dl_a[i];
        }
        direction(r1, r2, du, dv, dl);
        auto [ap, ad] = steps(du, dv, dl);
        const double eta = std::max(0.9, 1.0 - mu);
        ap = std::min(1.0, eta * ap);
        ad = std::min(1.0, eta * ad);
        for (std::size_t j = 0; j < n; ++j) x[j] += ap * dx[j];
        for (std::size_t i = 0; i < m; ++i) {
            u[i] += ap * du[i];
            v[i] += ap * dv[i];
            lam[i] += ad * dl[i];
        }
    }
    r = residual(a, x, b);
    out.objective = norm1(r);
    if (Vector xv = purify(a, b, r); !xv.empty()) {
        const double fv = norm1(residual(a, xv, b));
        if (fv < out.objective) {
            x = std::move(xv);
            out.objective = fv;
        }
    }
    out.x = std::move(x);
    return out;
}

// Parametrizes {z : c^T z = 1} as z0 + N w with N from a Householder reflector.
struct Affine {
    Vector z0;
    DenseMatrix n; // p x (p-1)
};

Affine unit_constraint_basis(std::span<const double> c) {
    const std::size_t p = c.size();
    const double cn = norm2(c);
    require(cn > 0.0, ErrorCode::InvalidArgument, "homogeneous form needs a nonzero constraint vector");
    Affine out;
    out.z0.assign(c.begin(), c.end());
    for (double& e : out.z0) e /= cn * cn;
    Vector hv(c.begin(), c.end());
    hv[0] += c[0] >= 0.0 ? cn : -cn;
    const double hh = dot(hv, hv);
    out.n = DenseMatrix(p, p - 1);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 1; j < p; ++j) out.n(i, j - 1) = (i == j ? 1.0 : 0.0) - 2.0 * hv[i] * hv[j] / hh;
    return out;
}

void validate(const L1Subproblem& prob) {
    require(prob.a.all_finite(), ErrorCode::InvalidArgument, "l1 subproblem has non-finite entries");
    if (prob.form == L1Form::residual) {
        require(prob.b.size() == prob.a.rows(), ErrorCode::DimensionMismatch, "l1 subproblem: b size");
    } else {
        require(prob.c.size() == prob.a.cols() && prob.a.cols() >= 2, ErrorCode::DimensionMismatch,
                "l1 subproblem: c size");
    }
    require(prob.a.rows() >= prob.a.cols(), ErrorCode::DimensionMismatch, "l1 subproblem needs rows >= cols");
}

// Maps either form to a residual problem; returns the affine map to recover z.
template <class Solver>
L1Result solve_any(const L1Subproblem& prob, Solver&& solver) {
    validate(prob);
    if (prob.form == L1Form::residual) return solver(prob.a, prob.b);
    const Affine aff = unit_constraint_basis(prob.c);
    const DenseMatrix an = multiply(prob.a, aff.n);
    Vector rhs = matvec(prob.a, aff.z0);
    for (double& e : rhs) e = -e;
    L1Result res = solver(an, rhs);
    Vector z = matvec(aff.n, res.x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += aff.z0[i];
    res.x = std::move(z);
    res.objective = norm1(matvec(prob.a, res.x));
    return res;
}

L1Result irls_residual(const DenseMatrix& a, std::span<const double> b, double tau, std::size_t max_iters) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    L1Result out;
    Vector x = ls_solve(a, b);
    Vector r = residual(a, x, b);
    double prev = smoothed_l1(r, tau);
    out.smoothed_history.push_back(prev);
    out.history.push_back(norm1(r));
    DenseMatrix wa(m, n);
    Vector wb(m);
    for (std::size_t it = 1;; ++it) {
        if (it > max_iters) fail(ErrorCode::MaxIters, "irls_l1 did not converge in " + std::to_string(max_iters));
        for (std::size_t i = 0; i < m; ++i) {
            const double s = 1.0 / std::sqrt(std::max(std::abs(r[i]), tau));
            for (std::size_t j = 0; j < n; ++j) wa(i, j) = a(i, j) * s;
            wb[i] = b[i] * s;
        }
        x = ls_solve(wa, wb);
        r = residual(a, x, b);
        const double cur = smoothed_l1(r, tau);
        out.smoothed_history.push_back(cur);
        out.history.push_back(norm1(r));
        out.iterations = it;
        const bool done = std::abs(prev - cur) <= 1e-10 * std::max(cur, std::numeric_limits<double>::min());
        prev = cur;
        if (done) break;
    }
    out.objective = norm1(r);
    out.x = std::move(x);
    return out;
}

} // namespace

L1Subproblem L1Subproblem::residual(DenseMatrix a, Vector b) {
    L1Subproblem p;
    p.a = std::move(a);
    p.b = std::move(b);
    p.form = L1Form::residual;
    return p;
}

L1Subproblem L1Subproblem::homogeneous(DenseMatrix a, Vector c) {
    L1Subproblem p;
    p.a = std::move(a);
    p.c = std::move(c);
    p.form = L1Form::homogeneous;
    return p;
}

double smoothed_l1(std::span<const double> r, double tau) {
    double s = 0.0;
    for (double e : r) {
        const double t = std::abs(e);
        s += t <= tau ? t * t / (2.0 * tau) + 0.5 * tau : t;
    }
    return s;
}

L1Result ipm_l1(const L1Subproblem& prob, double tol, std::size_t max_iters) {
    require(tol > 0.0, ErrorCode::InvalidArgument, "ipm_l1: tol must be positive");
    return solve_any(prob, [&](const DenseMatrix& a, std::span<const double> b) {
        return ipm_residual(a, b, tol, max_iters);
    });
}

L1Result irls_l1(const L1Subproblem& prob, double tau, std::size_t max_iters) {
    require(tau > 0.0, ErrorCode::InvalidArgument, "irls_l1: tau must be positive");
    return solve_any(prob, [&](const DenseMatrix& a, std::span<const double> b) {
        return irls_residual(a, b, tau, max_iters);
    });
}

} // namespace sketchreg
