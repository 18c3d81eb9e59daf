#include "sketchreg/solve_l2.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "sketchreg/linalg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace sketchreg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// x = V Sigma^-1 U^T c over the retained singular triplets.
Vector svd_solve(const SvdFactors& f, std::span<const double> c) {
    Vector t = matvec_t(f.u, c);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] /= f.sigma[k];
    return matvec(f.v, t);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    kernels::axpy(alpha, x.data(), y.data(), y.size());
}

void scale(double alpha, std::span<double> x) { kernels::scal(alpha, x.data(), x.size()); }

} // namespace

const char* to_string(SamplingMode mode) noexcept {
    return mode == SamplingMode::bernoulli ? "bernoulli" : "with_replacement";
}

SamplingMode parse_sampling_mode(const std::string& text) {
    if (text == "bernoulli") return SamplingMode::bernoulli;
    if (text == "with_replacement" || text == "replacement") return SamplingMode::with_replacement;
    fail(ErrorCode::InvalidArgument, "unknown sampling mode: " + text);
}

void score_against(SolveReport& report, const ProblemInstance& inst) {
    Vector r = matvec(inst.a, report.x_hat);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= inst.b[i];
    report.f_hat = inst.norm == NormKind::l2 ? norm2(r) : norm1(r);
    if (inst.f_star && *inst.f_star > 0.0) report.rel_err_f = std::abs(report.f_hat - *inst.f_star) / *inst.f_star;
    if (inst.x_star && norm2(*inst.x_star) > 0.0) report.rel_err_x = relative_error(report.x_hat, *inst.x_star);
}

SolveReport sketch_and_solve_l2(const ProblemInstance& inst, const SketchOperator& op, const SolverConfig& cfg) {
    const auto start = Clock::now();
    const std::size_t n = inst.a.cols();
    require(op.m == inst.a.rows(), ErrorCode::DimensionMismatch, "sketch operator row count differs from A");
    require(op.s >= n, ErrorCode::RankDeficient, "embedding dimension below n; increase s");
    SolveReport rep;
    rep.method = "sketch";
    rep.variant = to_string(op.variant);
    rep.s = op.s;
    rep.seed = cfg.seed;
    const DenseMatrix ab = hstack(inst.a, inst.b);
    RowBlockStream stream = RowBlockStream::from_matrix(ab, cfg.block_rows);
    const DenseMatrix sk = apply(op, stream, &rep.ledger);
    const SvdFactors f = jacobi_svd(sk.col_slice(0, n));
    require(f.sigma.size() == n, ErrorCode::RankDeficient, "sketch is rank deficient; increase s");
    const DenseMatrix sb = sk.col_slice(n, 1);
    rep.x_hat = svd_solve(f, sb.values());
    rep.wall_ms = elapsed_ms(start);
    score_against(rep, inst);
    return rep;
}

SampledProblem leverage_sample_l2(const DenseMatrix& a, std::span<const double> b, std::span<const double> scores,
                                  std::size_t s, SamplingMode mode, SeedSpec seed) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    require(b.size() == m && scores.size() == m, ErrorCode::DimensionMismatch, "leverage_sample_l2: sizes differ");
    require(s >= 1, ErrorCode::InvalidArgument, "sample size must be positive");
    double total = 0.0;
    for (double l : scores) {
        require(l >= 0.0 && std::isfinite(l), ErrorCode::InvalidArgument, "scores must be finite and nonnegative");
        total += l;
    }
    require(total > 0.0, ErrorCode::InvalidArgument, "scores sum to zero");
    const double sd = static_cast<double>(s);
    RandomStream rs(seed);
    SampledProblem out;
    if (mode == SamplingMode::bernoulli) {
        for (std::size_t i = 0; i < m; ++i) {
            const double q = std::min(1.0, sd * scores[i] / total);
            if (q > 0.0 && rs.uniform() < q) {
                out.rows.push_back(i);
                out.weights.push_back(1.0 / std::sqrt(q));
            }
        }
    } else {
        Vector cdf(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) cdf[i] = acc += scores[i] / total;
        for (std::size_t k = 0; k < s; ++k) {
            const double u = rs.uniform() * acc;
            const std::size_t i = std::min<std::size_t>(
                static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), m - 1);
            out.rows.push_back(i);
            out.weights.push_back(1.0 / std::sqrt(sd * scores[i] / total));
        }
    }
    out.a = DenseMatrix(out.rows.size(), n);
    out.b.resize(out.rows.size());
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        const auto src = a.row(out.rows[k]);
        auto dst = out.a.row(k);
        for (std::size_t j = 0; j < n; ++j) dst[j] = out.weights[k] * src[j];
        out.b[k] = out.weights[k] * b[out.rows[k]];
    }
    return out;
}

SolveReport sample_and_solve_l2(const ProblemInstance& inst, std::span<const double> scores, std::string label,
                                const SolverConfig& cfg) {
    const auto start = Clock::now();
    const std::size_t n = inst.a.cols();
    const std::size_t s = cfg.s ? cfg.s : 50 * n;
    SolveReport rep;
    rep.method = "sample";
    rep.variant = std::move(label);
    rep.s = s;
    rep.seed = cfg.seed;
    const SampledProblem sp =
        leverage_sample_l2(inst.a, inst.b, scores, s, cfg.sampling_mode, derive_stream(cfg.seed, 0x5a3));
    rep.ledger.add_pass();
    rep.x_hat = sp.rows.empty() ? Vector(n, 0.0) : min_length_solve(sp.a, sp.b);
    rep.wall_ms = elapsed_ms(start);
    score_against(rep, inst);
    return rep;
}

SolveReport lsqr(const LinearOp& apply_a, const LinearOp& apply_at, std::span<const double> b,
                 const Preconditioner* precond, const IterOptions& opt, CostLedger* ledger) {
    const auto start = Clock::now();
    require(opt.tol >= 0.0, ErrorCode::InvalidArgument, "lsqr tolerance must be nonnegative");
    CostLedger local;
    CostLedger& led = ledger ? *ledger : local;
    const auto op = [&](std::span<const double> v) { return apply_a(precond ? precond->apply(v) : Vector(v.begin(), v.end())); };
    const auto op_t = [&](std::span<const double> u) {
        Vector w = apply_at(u);
        return precond ? precond->apply_t(w) : w;
    };
    SolveReport rep;
    rep.method = "lsqr";
    rep.variant = precond ? precond->source : "none";
    Vector u(b.begin(), b.end());
    double beta = norm2(u);
    record_reduction(led);
    Vector v = op_t(u);
    const std::size_t n = v.size();
    Vector y(n, 0.0);
    if (beta > 0.0) {
        scale(1.0 / beta, u);
        scale(1.0 / beta, v);
    }
    double alpha = norm2(v);
    record_reduction(led);
    rep.residual_history.push_back(beta);
    if (beta == 0.0 || alpha == 0.0) {
        rep.x_hat = precond ? precond->apply(y) : y;
        rep.ledger = led;
        rep.wall_ms = elapsed_ms(start);
        return rep;
    }
    scale(1.0 / alpha, v);
    Vector w = v;
    double phibar = beta;
    double rhobar = alpha;
    double anorm2 = 0.0;
    const double bnorm = beta;
    rep.converged = false;
    std::size_t k = 0;
    while (k < opt.max_iters) {
        ++k;
        Vector av = op(v);
        for (std::size_t i = 0; i < av.size(); ++i) u[i] = av[i] - alpha * u[i];
        beta = norm2(u);
        record_reduction(led);
        if (beta > 0.0) scale(1.0 / beta, u);
        anorm2 += alpha * alpha + beta * beta;
        Vector atu = op_t(u);
        for (std::size_t j = 0; j < n; ++j) v[j] = atu[j] - beta * v[j];
        alpha = norm2(v);
        record_reduction(led);
        if (alpha > 0.0) scale(1.0 / alpha, v);

        const double rho = std::hypot(rhobar, beta);
        const double c = rhobar / rho;
        const double sn = beta / rho;
        const double theta = sn * alpha;
        rhobar = -c * alpha;
        const double phi = c * phibar;
        phibar = sn * phibar;
        axpy(phi / rho, w, y);
        for (std::size_t j = 0; j < n; ++j) w[j] = v[j] - (theta / rho) * w[j];

        const double rnorm = phibar;
        const double arnorm = phibar * alpha * std::abs(c);
        rep.residual_history.push_back(rnorm);
        if (rnorm <= opt.tol * bnorm || arnorm <= opt.tol * std::sqrt(anorm2) * rnorm) {
            rep.converged = true;
            break;
        }
    }
    rep.iterations = k;
    rep.x_hat = precond ? precond->apply(y) : y;
    rep.ledger = led;
    rep.wall_ms = elapsed_ms(start);
    if (!rep.converged && opt.throw_on_max_iters)
        fail(ErrorCode::MaxIters, "lsqr did not converge in " + std::to_string(opt.max_iters) + " iterations");
    return rep;
}

SolveReport chebyshev_semi_iterative(const LinearOp& apply_a, const LinearOp& apply_at, std::span<const double> b,
                                     std::pair<double, double> interval, const Preconditioner* precond,
                                     const IterOptions& opt, CostLedger* ledger) {
    const auto start = Clock::now();
    const auto [lo, hi] = interval;
    require(lo > 0.0 && hi > lo && std::isfinite(hi), ErrorCode::InvalidArgument,
            "Chebyshev interval must satisfy 0 < lo < hi < inf");
    CostLedger local;
    CostLedger& led = ledger ? *ledger : local;
    SolveReport rep;
    rep.method = "cs";
    rep.variant = precond ? precond->source : "none";
    // Eigenvalues of (AN)^T (AN) lie in [d - c, d + c].
    const double d = (hi * hi + lo * lo) / 2.0;
    const double c = (hi * hi - lo * lo) / 2.0;
    Vector r(b.begin(), b.end());
    Vector y;
    Vector v;
    double g0 = 0.0;
    double best = std::numeric_limits<double>::infinity();
    double alpha = 0.0;
    rep.converged = false;
    std::size_t k = 0;
    for (;; ++k) {
        Vector g = apply_at(r);
        if (precond) g = precond->apply_t(g);
        record_reduction(led);
        if (k == 0) {
            y.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        const double gn = norm2(g);
        if (k == 0) g0 = gn;
        if (g0 == 0.0) {
            rep.converged = true;
            break;
        }
        const double ratio = gn / g0;
        rep.residual_history.push_back(ratio);
        if (ratio <= opt.tol) {
            rep.converged = true;
            break;
        }
        // Growth from the rounding floor is not divergence.
        if (ratio > 10.0 * best && ratio > 1e-10) {
            rep.iterations = k;
            rep.ledger = led;
            fail(ErrorCode::Divergence, "Chebyshev iteration diverged; sigma(AN) lies outside the interval");
        }
        best = std::min(best, ratio);
        if (k == opt.max_iters) break;
        double beta = 0.0;
        if (k == 0) {
            alpha = 1.0 / d;
        } else {
            beta = k == 1 ? 0.5 * (c / d) * (c / d) : (alpha * c / 2.0) * (alpha * c / 2.0);
            alpha = 1.0 / (d - beta / alpha);
        }
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = g[j] + beta * v[j];
        axpy(alpha, v, y);
        const Vector av = apply_a(precond ? precond->apply(v) : v);
        axpy(-alpha, av, r);
    }
    rep.iterations = k;
    rep.x_hat = precond ? precond->apply(y) : y;
    rep.ledger = led;
    rep.wall_ms = elapsed_ms(start);
    if (!rep.converged && opt.throw_on_max_iters)
        fail(ErrorCode::MaxIters, "Chebyshev iteration did not converge in " + std::to_string(opt.max_iters) +
                                      " iterations");
    return rep;
}

std::pair<LinearOp, LinearOp> stream_operators(RowBlockStream& stream, CostLedger* ledger) {
    LinearOp a = [&stream, ledger](std::span<const double> x) { return stream_matvec(stream, x, ledger); };
    LinearOp at = [&stream, ledger](std::span<const double> u) { return stream_matvec_t(stream, u, ledger); };
    return {std::move(a), std::move(at)};
}

SolveReport lsrn_solve(const ProblemInstance& inst, IterativeMethod method, const SolverConfig& cfg) {
    const auto start = Clock::now();
    require(inst.a.rows() > inst.a.cols(), ErrorCode::InvalidArgument, "lsrn_solve needs an over-determined A");
    RowBlockStream stream = RowBlockStream::from_matrix(inst.a, cfg.block_rows);
    CostLedger ledger;
    Preconditioner p = lsrn_precond(stream, cfg.gamma_oversample, derive_stream(cfg.seed, 0x15a), 0.01, &ledger);
    p.source = "gaussian";
    const auto [op_a, op_at] = stream_operators(stream, &ledger);
    const IterOptions opt{cfg.tol, cfg.max_iters, true};
    SolveReport rep;
    if (method == IterativeMethod::lsqr) {
        rep = lsqr(op_a, op_at, inst.b, &p, opt, &ledger);
    } else {
        require(std::isfinite(p.predicted_interval->second), ErrorCode::InvalidArgument,
                "predicted interval is unbounded; increase gamma");
        rep = chebyshev_semi_iterative(op_a, op_at, inst.b, *p.predicted_interval, &p, opt, &ledger);
    }
    rep.method = method == IterativeMethod::lsqr ? "lsrn-lsqr" : "lsrn-cs";
    rep.s = static_cast<std::size_t>(std::ceil(cfg.gamma_oversample * static_cast<double>(inst.a.cols())));
    rep.seed = cfg.seed;
    rep.kappa_bound = p.predicted_interval->second / p.predicted_interval->first;
    rep.wall_ms = elapsed_ms(start);
    score_against(rep, inst);
    return rep;
}

} // namespace sketchreg
