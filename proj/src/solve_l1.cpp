#include "sketchreg/solve_l1.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/l1core.hpp"
#include "sketchreg/linalg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>

namespace sketchreg {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kFastProbeStream = 0xfa57;
constexpr std::uint64_t kQueryStream = 0x9e7;

DenseMatrix block_matrix(const RowBlock& blk) {
    return DenseMatrix(blk.rows, blk.cols, std::vector<double>(blk.data, blk.data + blk.rows * blk.cols));
}

// Row-norm map: rows of A times this matrix give the rows whose norms are used.
struct NormMap {
    DenseMatrix m;
    bool fast = false;

    double norm(std::span<const double> row) const {
        if (!fast) return norm1(row);
        return norm2(row) / std::sqrt(static_cast<double>(row.size()));
    }
};

NormMap norm_map(const Preconditioner& p, std::size_t m, const L1SamplingOptions& opt) {
    NormMap map{p.n_matrix(), opt.fast};
    if (opt.fast) {
        const auto r = static_cast<std::size_t>(std::ceil(8.0 * std::log(static_cast<double>(std::max<std::size_t>(m, 2)))));
        DenseMatrix g(p.dim(), r);
        RandomStream rs(derive_stream(opt.seed, kFastProbeStream));
        rs.fill_normal(g.storage());
        map.m = multiply(map.m, g);
    }
    return map;
}

struct Candidate {
    double key = 0.0; // u / norm
    std::size_t row = 0;
    Vector values;

    bool operator<(const Candidate& o) const noexcept { return key < o.key || (key == o.key && row < o.row); }
};

// N only steers the sampling, so a sketch of [A -b] that loses rank (a
// consistent system, or colliding buckets) falls back to the truncated basis
// V_r Sigma_r^-1 of its SVD.
Preconditioner sampling_basis(const DenseMatrix& sk, std::string source) {
    try {
        return qr_precond(sk, std::move(source));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::RankDeficient) throw;
    }
    const SvdFactors svd = jacobi_svd(sk);
    require(!svd.sigma.empty(), ErrorCode::RankDeficient, "sketch of [A -b] is zero");
    Preconditioner p;
    p.kind = PrecondKind::svd;
    p.factor = DenseMatrix(sk.cols(), svd.sigma.size());
    for (std::size_t i = 0; i < sk.cols(); ++i)
        for (std::size_t k = 0; k < svd.sigma.size(); ++k) p.factor(i, k) = svd.v(i, k) / svd.sigma[k];
    p.source = std::move(source) + "-svd";
    return p;
}

double sum_sequential(std::span<const double> w) {
    double total = 0.0;
    for (double v : w) total += v;
    return total;
}

// Scale of the inclusion rule q_i = min(1, t w_i).
double rule_scale(std::span<const double> w, double s, std::size_t cols, const std::optional<double>& mapper_kappa,
                  bool expected_size) {
    if (mapper_kappa) {
        require(*mapper_kappa > 0.0, ErrorCode::InvalidArgument, "mapper kappa must be positive");
        return s / (*mapper_kappa * std::sqrt(static_cast<double>(cols)));
    }
    if (expected_size) return expected_size_scale(w, s);
    const double total = sum_sequential(w);
    return total > 0.0 ? s / total : 0.0;
}

} // namespace

Preconditioner condition_l1(RowBlockStream& a, SketchVariant variant, std::size_t s, SeedSpec seed, CostLedger* ledger) {
    require(is_l1_variant(variant), ErrorCode::InvalidArgument, "condition_l1 needs an l1 sketch variant");
    const std::size_t n = a.cols();
    if (s == 0) s = embedding_dim_default(variant, n, 0.5, 0.1, a.rows());
    require(s >= n, ErrorCode::RankDeficient, "embedding dimension below n; increase s");
    const DenseMatrix sk = apply(SketchOperator::make(variant, s, a.rows(), seed), a, ledger);
    Preconditioner p = qr_precond(sk, std::string(to_string(variant)));
    for (std::size_t i = 0; i < n; ++i)
        if (p.factor(i, i) < 0.0)
            for (std::size_t j = i; j < n; ++j) p.factor(i, j) = -p.factor(i, j);
    return p;
}

double expected_size_scale(std::span<const double> w, double s) {
    require(s > 0.0, ErrorCode::InvalidArgument, "expected sample size must be positive");
    Vector v;
    for (double x : w) {
        require(x >= 0.0 && std::isfinite(x), ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
        if (x > 0.0) v.push_back(x);
    }
    if (s >= static_cast<double>(v.size())) return std::numeric_limits<double>::infinity();
    std::sort(v.begin(), v.end(), std::greater<>());
    // tail[k] = sum of v[k..]; with the k largest capped, t = (s - k) / tail[k].
    Vector tail(v.size() + 1, 0.0);
    for (std::size_t k = v.size(); k-- > 0;) tail[k] = tail[k + 1] + v[k];
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double t = (s - static_cast<double>(k)) / tail[k];
        if (t * v[k] <= 1.0) return t;
    }
    return std::numeric_limits<double>::infinity();
}

SamplingDistribution l1_sampling_distribution(RowBlockStream& a, const Preconditioner& n_mat, std::size_t s,
                                              const L1SamplingOptions& opt, CostLedger* ledger) {
    require(n_mat.dim() == a.cols(), ErrorCode::DimensionMismatch, "preconditioner size differs from A");
    require(s >= a.cols(), ErrorCode::InvalidArgument, "sample size must be at least n");
    const NormMap map = norm_map(n_mat, a.rows(), opt);
    SamplingDistribution d;
    d.base_norms.assign(a.rows(), 0.0);
    a.for_each_block(ledger, [&](const RowBlock& blk) {
        const DenseMatrix u = multiply(block_matrix(blk), map.m);
        for (std::size_t i = 0; i < blk.rows; ++i) d.base_norms[blk.row0 + i] = map.norm(u.row(i));
    });
    d.scale = rule_scale(d.base_norms, static_cast<double>(s), a.cols(), opt.mapper_kappa, opt.expected_size);
    if (opt.mapper_kappa) d.kappa_bar_used = *opt.mapper_kappa;
    d.probs.resize(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        d.probs[i] = d.base_norms[i] > 0.0 ? std::min(1.0, d.scale * d.base_norms[i]) : 0.0;
    return d;
}

double sample_size_l1(double kappa_bar, std::size_t n, double eps, double delta, double p) {
    require(eps > 0.0 && eps < 1.0 / 7.0, ErrorCode::EpsOutOfRange, "eps must lie in (0, 1/7)");
    require(kappa_bar > 0.0 && n >= 1 && delta > 0.0 && delta < 1.0 && p >= 1.0, ErrorCode::InvalidArgument,
            "sample_size_l1 needs positive kappa, n, delta in (0, 1) and p >= 1");
    const double nd = static_cast<double>(n);
    const double s = 16.0 * (std::pow(2.0, p) + 2.0) * std::pow(kappa_bar, p) *
                     (nd * std::log(12.0 / eps) + std::log(2.0 / delta)) / (p * p * eps * eps);
    return std::ceil(s);
}

L1Run solve_l1_low_precision(const ProblemInstance& inst, const L1Config& cfg, std::size_t n_queries) {
    const auto start = Clock::now();
    require(n_queries >= 1, ErrorCode::InvalidArgument, "n_queries must be at least 1");
    const std::size_t m = inst.a.rows();
    const std::size_t n = inst.a.cols();
    const std::size_t nb = n + 1;
    Vector neg_b(inst.b);
    for (double& v : neg_b) v = -v;
    const DenseMatrix abar = hstack(inst.a, neg_b);
    RowBlockStream stream = RowBlockStream::from_matrix(abar, cfg.block_rows);
    L1Run run;

    // Pass 1: conditioning.
    const std::size_t s_cond = cfg.s_condition ? cfg.s_condition : embedding_dim_default(cfg.variant, nb, 0.5, 0.1, m);
    const SketchOperator op = SketchOperator::make(cfg.variant, s_cond, m, derive_stream(cfg.seed, 1));
    const DenseMatrix sk = apply(op, stream, &run.ledger);
    const Preconditioner p = sampling_basis(sk, std::string(to_string(cfg.variant)));
    const double kappa_est = kappa_bar_p(multiply(sk, p.n_matrix()), 1.0, 2 * nb, cfg.seed).value();
    run.theory_s = sample_size_l1(std::max(kappa_est, 1.0), nb, cfg.eps, cfg.delta, 1.0);
    run.s = cfg.s ? cfg.s : static_cast<std::size_t>(std::min(run.theory_s, 100.0 * static_cast<double>(n)));
    const double sd = static_cast<double>(run.s);

    // Pass 2: one sweep draws every query. Each query keeps its rows with the
    // smallest keys; the scale that decides which of them survive is fixed
    // once every norm is known.
    const L1SamplingOptions opt{cfg.fast, cfg.mapper_kappa, cfg.expected_size, derive_stream(cfg.seed, 2)};
    const NormMap map = norm_map(p, m, opt);
    const std::size_t cap = std::min(m, 2 * run.s + nb);
    std::vector<SeedSpec> qseeds;
    for (std::size_t k = 0; k < n_queries; ++k) qseeds.push_back(derive_stream(cfg.seed, kQueryStream + k));
    std::vector<std::priority_queue<Candidate>> heaps(n_queries);
    Vector norms(m, 0.0);
    stream.for_each_block(
        &run.ledger,
        [&](const RowBlock& blk) {
            const DenseMatrix u = multiply(block_matrix(blk), map.m);
            for (std::size_t i = 0; i < blk.rows; ++i) {
                const std::size_t row = blk.row0 + i;
                const double norm = map.norm(u.row(i));
                norms[row] = norm;
                if (!(norm > 0.0)) continue;
                for (std::size_t k = 0; k < n_queries; ++k) {
                    const double key = RandomStream(derive_stream(qseeds[k], row)).uniform() / norm;
                    auto& heap = heaps[k];
                    if (heap.size() == cap && !(key < heap.top().key)) continue;
                    const auto vals = blk.row(i);
                    heap.push({key, row, Vector(vals.begin(), vals.end())});
                    if (heap.size() > cap) heap.pop();
                }
            }
        },
        false);
    const double scale = rule_scale(norms, sd, nb, cfg.mapper_kappa, cfg.expected_size);

    Vector c(nb, 0.0);
    c[n] = 1.0;
    DenseMatrix z_all(nb, n_queries);
    for (std::size_t k = 0; k < n_queries; ++k) {
        auto& heap = heaps[k];
        require(heap.size() < cap || heap.top().key >= scale, ErrorCode::InvalidArgument,
                "sample exceeds the candidate budget; lower s or the mapper scale");
        std::vector<Candidate> kept;
        while (!heap.empty()) {
            if (heap.top().key < scale) kept.push_back(heap.top());
            heap.pop();
        }
        std::sort(kept.begin(), kept.end(), [](const Candidate& x, const Candidate& y) { return x.row < y.row; });
        require(kept.size() >= nb, ErrorCode::RankDeficient, "l1 sample has fewer rows than columns; increase s");
        DenseMatrix sub(kept.size(), nb);
        for (std::size_t r = 0; r < kept.size(); ++r) {
            const double w = 1.0 / std::min(1.0, scale * norms[kept[r].row]);
            for (std::size_t j = 0; j < nb; ++j) sub(r, j) = w * kept[r].values[j];
        }
        const L1Result res = ipm_l1(L1Subproblem::homogeneous(std::move(sub), c), cfg.ipm_tol);
        SolveReport rep;
        rep.method = "l1-sample";
        rep.variant = to_string(cfg.variant);
        rep.s = run.s;
        rep.seed = cfg.seed;
        rep.iterations = res.iterations;
        rep.x_hat.assign(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(n));
        for (std::size_t j = 0; j < nb; ++j) z_all(j, k) = j < n ? res.x[j] : 1.0;
        run.sample_rows.push_back(kept.size());
        run.queries.push_back(std::move(rep));
    }

    // Pass 3: objectives of every query.
    const Vector f = map_blocks<Vector>(
        stream, &run.objective_ledger,
        [&](const RowBlock& blk) {
            const DenseMatrix r = multiply(block_matrix(blk), z_all);
            Vector acc(n_queries, 0.0);
            for (std::size_t i = 0; i < blk.rows; ++i)
                for (std::size_t k = 0; k < n_queries; ++k) acc[k] += std::abs(r(i, k));
            return acc;
        },
        [](Vector x, const Vector& y) {
            for (std::size_t k = 0; k < x.size(); ++k) x[k] += y[k];
            return x;
        });
    const double wall = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    for (std::size_t k = 0; k < n_queries; ++k) {
        SolveReport& rep = run.queries[k];
        rep.f_hat = f[k];
        rep.ledger = run.ledger;
        rep.ledger.passes += run.objective_ledger.passes;
        rep.ledger.reductions += run.objective_ledger.reductions;
        rep.ledger.flops_estimate += run.objective_ledger.flops_estimate;
        rep.wall_ms = wall;
        if (inst.norm == NormKind::l1 && inst.f_star && *inst.f_star > 0.0)
            rep.rel_err_f = std::abs(rep.f_hat - *inst.f_star) / *inst.f_star;
        if (inst.norm == NormKind::l1 && inst.x_star && norm2(*inst.x_star) > 0.0)
            rep.rel_err_x = relative_error(rep.x_hat, *inst.x_star);
    }
    return run;
}

} // namespace sketchreg
