#include "sketchreg/matrixgen.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/l1core.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/random.hpp"

#include <algorithm>
#include <cmath>

namespace sketchreg {
namespace {

// Stream indices per generated component.
enum : std::uint64_t {
    kStreamU = 1,
    kStreamV = 2,
    kStreamX = 3,
    kStreamErr = 4,
    kStreamB = 11,
    kStreamR = 12,
    kStreamXn = 13,
    kStreamErrN = 14,
};

DenseMatrix gaussian(std::size_t m, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    DenseMatrix g(m, n);
    RandomStream(derive_stream(seed, stream)).fill_normal(g.storage());
    return g;
}

Vector gaussian_vec(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    Vector v(n);
    RandomStream(derive_stream(seed, stream)).fill_normal(v);
    return v;
}

// b = A x + 0.25 ||A x|| / ||e|| e.
Vector noisy_rhs(const DenseMatrix& a, std::uint64_t seed, std::uint64_t xs, std::uint64_t es) {
    Vector b = matvec(a, gaussian_vec(a.cols(), seed, xs));
    const Vector err = gaussian_vec(a.rows(), seed, es);
    const double scale = 0.25 * norm2(b) / norm2(err);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * err[i];
    return b;
}

struct Optimum {
    Vector x;
    double f = 0.0;
    double xi = 0.0; // l2 mass fraction
};

Optimum l2_optimum(const DenseMatrix& a, std::span<const double> b) {
    Optimum o;
    o.x = min_length_solve(a, b);
    const Vector ax = matvec(a, o.x);
    o.f = norm2(subtract(b, ax));
    const double bn = norm2(b);
    o.xi = bn > 0.0 ? std::min(1.0, norm2(ax) / bn) : 0.0;
    return o;
}

void set_l2_optimum(ProblemInstance& inst) {
    Optimum o = l2_optimum(inst.a, inst.b);
    inst.x_star = std::move(o.x);
    inst.f_star = o.f;
    inst.mass_fraction = o.xi;
}

struct NonuniformParts {
    DenseMatrix b; // top x d/2 Gaussian
    DenseMatrix r; // top x d/2, 1e-8 U(0,1)
};

NonuniformParts nonuniform_parts(std::size_t m, std::size_t d, std::uint64_t seed) {
    require(d >= 2 && d % 2 == 0, ErrorCode::InvalidArgument, "gen_nonuniform: d must be even and >= 2");
    require(m > d / 2 && m - d / 2 >= d / 2, ErrorCode::DimensionMismatch, "gen_nonuniform: m too small for d");
    const std::size_t h = d / 2;
    const std::size_t top = m - h;
    NonuniformParts p{gaussian(top, h, seed, kStreamB), DenseMatrix(top, h)};
    RandomStream rs(derive_stream(seed, kStreamR));
    for (double& e : p.r.storage()) e = 1e-8 * rs.uniform();
    return p;
}

// Small matrix with the singular values of (alpha B  R; 0  I): the top block is
// replaced by its triangular factor (alpha T1  T2).
struct CondModel {
    DenseMatrix t; // k x d, k = min(top, d)
    std::size_t h = 0;

    double cond(double alpha) const {
        const std::size_t k = t.rows();
        DenseMatrix s(k + h, 2 * h);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < 2 * h; ++j) s(i, j) = j < h ? alpha * t(i, j) : t(i, j);
        for (std::size_t i = 0; i < h; ++i) s(k + i, h + i) = 1.0;
        const Vector sv = singular_values(s);
        return sv.front() / sv.back();
    }
};

CondModel cond_model(const NonuniformParts& p) {
    const std::size_t h = p.b.cols();
    const std::size_t top = p.b.rows();
    DenseMatrix br(top, 2 * h);
    for (std::size_t i = 0; i < top; ++i) {
        std::copy_n(p.b.row(i).data(), h, br.row(i).data());
        std::copy_n(p.r.row(i).data(), h, br.row(i).data() + h);
    }
    CondModel model;
    model.h = h;
    model.t = top > 2 * h ? qr_factor(br, false).r : br;
    return model;
}

DenseMatrix assemble_nonuniform(const NonuniformParts& p, double alpha) {
    const std::size_t h = p.b.cols();
    const std::size_t top = p.b.rows();
    DenseMatrix a(top + h, 2 * h);
    for (std::size_t i = 0; i < top; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            a(i, j) = alpha * p.b(i, j);
            a(i, h + j) = p.r(i, j);
        }
    for (std::size_t i = 0; i < h; ++i) a(top + i, h + i) = 1.0;
    return a;
}

// Illinois false position on log alpha; cond grows with alpha past the point
// where alpha B and the identity block have comparable scale.
double solve_alpha(const CondModel& model, const NonuniformParts& p, double kappa) {
    const Vector sb = singular_values(p.b);
    double lo = std::log(1.0 / sb.back());
    double flo = std::log(model.cond(std::exp(lo))) - std::log(kappa);
    require(flo <= 0.0, ErrorCode::InvalidArgument,
            "calibrate_alpha: kappa below the attainable minimum " + std::to_string(std::exp(flo) * kappa));
    double hi = std::log(kappa / sb.front()) + std::log(2.0);
    double fhi = std::log(model.cond(std::exp(hi))) - std::log(kappa);
    for (int grow = 0; fhi < 0.0; ++grow) {
        require(grow < 60, ErrorCode::NoConvergence, "calibrate_alpha: cannot bracket kappa");
        hi += std::log(4.0);
        fhi = std::log(model.cond(std::exp(hi))) - std::log(kappa);
    }
    if (flo == 0.0) return std::exp(lo);
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        const double mid = (lo * fhi - hi * flo) / (fhi - flo);
        const double fm = std::log(model.cond(std::exp(mid))) - std::log(kappa);
        if (std::abs(fm) <= 1e-9 || hi - lo <= 1e-14) return std::exp(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
    }
    fail(ErrorCode::NoConvergence, "calibrate_alpha did not converge");
}

ProblemInstance build_nonuniform(const NonuniformParts& p, double alpha, double kappa, std::uint64_t seed) {
    ProblemInstance inst;
    inst.a = assemble_nonuniform(p, alpha);
    inst.b = noisy_rhs(inst.a, seed, kStreamXn, kStreamErrN);
    inst.alpha = alpha;
    inst.top_rows = p.b.rows();
    inst.kappa_target = kappa;
    inst.family = kappa >= kBadKappa ? Family::NB : Family::NG;
    inst.seed = seed;
    set_l2_optimum(inst);
    return inst;
}

// Row weights turning a stacked problem into a base-size one: stacked rows
// contribute repnum copies, so l2 weights are sqrt(repnum) and l1 weights repnum.
struct Weighted {
    DenseMatrix a;
    Vector b;
};

Weighted weighted_base(const ProblemInstance& inst, std::size_t repnum, StackMode mode, double power) {
    const double w = std::pow(static_cast<double>(repnum), power);
    const std::size_t rows = mode == StackMode::stack2 ? inst.top_rows : inst.a.rows();
    Weighted out{inst.a, inst.b};
    for (std::size_t i = 0; i < rows; ++i) {
        for (double& e : out.a.row(i)) e *= w;
        out.b[i] *= w;
    }
    return out;
}

void check_stack(const ProblemInstance& inst, std::size_t repnum, StackMode mode) {
    require(repnum >= 1, ErrorCode::InvalidArgument, "stack: repnum must be positive");
    require(inst.stack_mode == StackMode::none, ErrorCode::IllegalStack, "stack: instance is already stacked");
    require(mode != StackMode::none, ErrorCode::InvalidArgument, "stack: mode must be stack1 or stack2");
    if (mode == StackMode::stack2)
        require((inst.family == Family::NG || inst.family == Family::NB) && inst.top_rows > 0, ErrorCode::IllegalStack,
                "STACK2 applies only to NG/NB instances");
}

// Stacked metadata and optimum, computed on a weighted base-size problem.
ProblemInstance stacked_meta(const ProblemInstance& inst, std::size_t repnum, StackMode mode) {
    ProblemInstance out;
    out.family = inst.family;
    out.norm = inst.norm;
    out.kappa_target = inst.kappa_target;
    out.repnum = repnum;
    out.stack_mode = mode;
    out.alpha = inst.alpha;
    out.top_rows = inst.top_rows;
    out.seed = inst.seed;
    const double r = static_cast<double>(repnum);
    if (mode == StackMode::stack1) {
        out.x_star = inst.x_star;
        if (inst.f_star) out.f_star = inst.norm == NormKind::l2 ? std::sqrt(r) * *inst.f_star : r * *inst.f_star;
        out.mass_fraction = inst.mass_fraction;
        return out;
    }
    const Weighted w2 = weighted_base(inst, repnum, mode, 0.5);
    Optimum o = l2_optimum(w2.a, w2.b);
    out.mass_fraction = o.xi;
    if (inst.norm == NormKind::l2) {
        out.x_star = std::move(o.x);
        out.f_star = o.f;
    } else {
        Weighted w1 = weighted_base(inst, repnum, mode, 1.0);
        L1Result res = ipm_l1(L1Subproblem::residual(std::move(w1.a), std::move(w1.b)));
        out.x_star = std::move(res.x);
        out.f_star = res.objective;
    }
    return out;
}

// Calls emit(ptr, count) for the stacked rows of a matrix with `cols` columns.
template <class Emit>
void for_stacked_rows(const double* data, std::size_t rows, std::size_t cols, std::size_t top, std::size_t repnum,
                      StackMode mode, Emit&& emit) {
    const std::size_t rep_rows = mode == StackMode::stack2 ? top : rows;
    for (std::size_t k = 0; k < repnum; ++k) emit(data, rep_rows);
    if (rep_rows < rows) emit(data + rep_rows * cols, rows - rep_rows);
}

} // namespace

std::string_view to_string(Family f) noexcept {
    switch (f) {
    case Family::UG: return "UG";
    case Family::UB: return "UB";
    case Family::NG: return "NG";
    case Family::NB: return "NB";
    }
    return "?";
}

std::string_view to_string(StackMode s) noexcept {
    switch (s) {
    case StackMode::none: return "none";
    case StackMode::stack1: return "stack1";
    case StackMode::stack2: return "stack2";
    }
    return "?";
}

std::optional<Family> parse_family(std::string_view s) noexcept {
    for (Family f : {Family::UG, Family::UB, Family::NG, Family::NB})
        if (s == to_string(f)) return f;
    return std::nullopt;
}

std::optional<StackMode> parse_stack(std::string_view s) noexcept {
    for (StackMode m : {StackMode::none, StackMode::stack1, StackMode::stack2})
        if (s == to_string(m)) return m;
    if (s == "STACK1") return StackMode::stack1;
    if (s == "STACK2") return StackMode::stack2;
    return std::nullopt;
}

ProblemInstance gen_uniform(std::size_t m, std::size_t n, double kappa, std::uint64_t seed) {
    require(n >= 2 && m >= n, ErrorCode::DimensionMismatch, "gen_uniform needs m >= n >= 2");
    require(kappa >= 1.0 && std::isfinite(kappa), ErrorCode::InvalidArgument, "gen_uniform needs kappa >= 1");
    DenseMatrix u = qr_factor(gaussian(m, n, seed, kStreamU)).q;
    const DenseMatrix v = qr_factor(gaussian(n, n, seed, kStreamV)).q;
    // linspace(1, 1/kappa, n)
    Vector s(n);
    for (std::size_t j = 0; j < n; ++j)
        s[j] = 1.0 + (1.0 / kappa - 1.0) * static_cast<double>(j) / static_cast<double>(n - 1);
    DenseMatrix us = u;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) us(i, j) *= s[j];
    ProblemInstance inst;
    inst.a = multiply(us, v.transposed());
    inst.b = noisy_rhs(inst.a, seed, kStreamX, kStreamErr);
    inst.kappa_target = kappa;
    inst.family = kappa >= kBadKappa ? Family::UB : Family::UG;
    inst.seed = seed;
    set_l2_optimum(inst);
    return inst;
}

double calibrate_alpha(std::size_t m, std::size_t d, double kappa, std::uint64_t seed) {
    require(kappa > 1.0 && std::isfinite(kappa), ErrorCode::InvalidArgument, "calibrate_alpha needs kappa > 1");
    const NonuniformParts p = nonuniform_parts(m, d, seed);
    return solve_alpha(cond_model(p), p, kappa);
}

ProblemInstance gen_nonuniform(std::size_t m, std::size_t d, double alpha, std::uint64_t seed) {
    require(alpha > 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument, "gen_nonuniform needs alpha > 0");
    const NonuniformParts p = nonuniform_parts(m, d, seed);
    return build_nonuniform(p, alpha, cond_model(p).cond(alpha), seed);
}

ProblemInstance generate(Family family, std::size_t m, std::size_t n, double kappa, std::uint64_t seed) {
    if (family == Family::UG || family == Family::UB) {
        ProblemInstance inst = gen_uniform(m, n, kappa, seed);
        inst.family = family;
        return inst;
    }
    const NonuniformParts p = nonuniform_parts(m, n, seed);
    const double alpha = solve_alpha(cond_model(p), p, kappa);
    ProblemInstance inst = build_nonuniform(p, alpha, kappa, seed);
    inst.family = family;
    return inst;
}

void attach_l1_optimum(ProblemInstance& inst) {
    require(inst.stack_mode == StackMode::none, ErrorCode::InvalidArgument,
            "attach_l1_optimum applies to base instances");
    L1Result res = ipm_l1(L1Subproblem::residual(inst.a, inst.b));
    inst.norm = NormKind::l1;
    inst.x_star = std::move(res.x);
    inst.f_star = res.objective;
}

ProblemInstance stack(const ProblemInstance& inst, std::size_t repnum, StackMode mode) {
    check_stack(inst, repnum, mode);
    ProblemInstance out = stacked_meta(inst, repnum, mode);
    const std::size_t n = inst.a.cols();
    const std::size_t rep_rows = mode == StackMode::stack2 ? inst.top_rows : inst.a.rows();
    const std::size_t total = repnum * rep_rows + (inst.a.rows() - rep_rows);
    out.a = DenseMatrix(total, n);
    out.b.resize(total);
    std::size_t at = 0;
    for_stacked_rows(inst.a.data(), inst.a.rows(), n, inst.top_rows, repnum, mode,
                     [&](const double* p, std::size_t count) {
                         std::copy_n(p, count * n, out.a.data() + at * n);
                         std::copy_n(inst.b.data() + (p - inst.a.data()) / static_cast<std::ptrdiff_t>(n), count,
                                     out.b.data() + at);
                         at += count;
                     });
    return out;
}

ProblemInstance write_stacked(const ProblemInstance& inst, std::size_t repnum, StackMode mode,
                              const std::string& a_path, const std::string& b_path) {
    ProblemInstance out = inst;
    if (mode != StackMode::none) {
        check_stack(inst, repnum, mode);
        out = stacked_meta(inst, repnum, mode);
    } else {
        out.a = DenseMatrix();
        out.b.clear();
    }
    const std::size_t n = inst.a.cols();
    RnlaWriter wa(a_path, n);
    RnlaWriter wb(b_path, 1);
    const std::size_t reps = mode == StackMode::none ? 1 : repnum;
    const StackMode eff = mode == StackMode::none ? StackMode::stack1 : mode;
    for_stacked_rows(inst.a.data(), inst.a.rows(), n, inst.top_rows, reps, eff,
                     [&](const double* p, std::size_t count) {
                         wa.append(p, count);
                         wb.append(inst.b.data() + (p - inst.a.data()) / static_cast<std::ptrdiff_t>(n), count);
                     });
    wa.close();
    wb.close();
    return out;
}

} // namespace sketchreg
