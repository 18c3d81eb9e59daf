#include "sketchreg/sketch.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "sketchreg/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

namespace sketchreg {
namespace {

// Stream index reserved for the SRDHT row sample; input rows use 0..m-1.
constexpr std::uint64_t kSampleStream = ~std::uint64_t{0};
// Input rows per generated tile; bounds tile memory for large blocks.
constexpr std::size_t kRowTile = 2048;

bool is_dense(SketchVariant v) {
    return v == SketchVariant::gaussian || v == SketchVariant::rademacher || v == SketchVariant::cauchy ||
           v == SketchVariant::srdht;
}

class Applier {
public:
    Applier(const SketchOperator& op, std::size_t n) : op_(op), n_(n), out_(op.s, n) {
        if (op.variant == SketchVariant::srdht) init_srdht();
    }

    void add(const double* rows, std::size_t row0, std::size_t count) {
        if (is_dense(op_.variant))
            add_dense(rows, row0, count);
        else if (op_.variant == SketchVariant::fast_cauchy)
            add_fct(rows, count);
        else
            add_sparse(rows, row0, count);
    }

    DenseMatrix finish() {
        if (op_.variant == SketchVariant::fast_cauchy && pending_rows_ > 0) {
            pending_.resize(op_.t * n_, 0.0);
            fct_group();
        }
        const double s = static_cast<double>(op_.s);
        double scale = 1.0;
        switch (op_.variant) {
        case SketchVariant::gaussian:
        case SketchVariant::rademacher:
        case SketchVariant::srdht: scale = 1.0 / std::sqrt(s); break;
        case SketchVariant::cauchy: scale = op_.scale_c / s; break;
        case SketchVariant::fast_cauchy: scale = 4.0; break;
        default: break;
        }
        if (scale != 1.0) kernels::scal(scale, out_.data(), out_.size());
        return std::move(out_);
    }

private:
    // cas(2 pi q / m) table and the sampled transform rows.
    void init_srdht() {
        const std::size_t m = op_.m;
        cas_.resize(m);
        for (std::size_t q = 0; q < m; ++q) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(m);
            cas_[q] = std::cos(th) + std::sin(th);
        }
        // Partial Fisher-Yates: s distinct rows without replacement.
        std::vector<std::uint64_t> perm(m);
        for (std::size_t q = 0; q < m; ++q) perm[q] = q;
        RandomStream rs(derive_stream(op_.seed, kSampleStream));
        for (std::size_t i = 0; i < op_.s; ++i) std::swap(perm[i], perm[i + rs.uniform_index(m - i)]);
        freq_.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(op_.s));
    }

    void fill_tile(std::size_t chunk, std::size_t sc, std::size_t r0, std::size_t k, double* tile) const {
        for (std::size_t j = 0; j < k; ++j) {
            const std::uint64_t r = r0 + j;
            double* row = tile + j * sc;
            if (op_.variant == SketchVariant::srdht) {
                const double d = RandomStream(derive_stream(op_.seed, r)).rademacher();
                const std::uint64_t* f = freq_.data() + chunk * kSketchChunk;
                for (std::size_t i = 0; i < sc; ++i)
                    row[i] = d * cas_[static_cast<std::size_t>(
                                     (static_cast<unsigned __int128>(f[i]) * r) % op_.m)];
                continue;
            }
            RandomStream rs(derive_stream(derive_stream(op_.seed, r), chunk));
            switch (op_.variant) {
            case SketchVariant::gaussian: rs.fill_normal({row, sc}); break;
            case SketchVariant::rademacher: rs.fill_rademacher({row, sc}); break;
            default: rs.fill_cauchy({row, sc}); break;
            }
        }
    }

    // out[chunk] += tile^T A_rows, chunk by chunk over disjoint output rows.
    void add_dense(const double* rows, std::size_t row0, std::size_t count) {
        const std::size_t chunks = (op_.s + kSketchChunk - 1) / kSketchChunk;
        for (std::size_t sub = 0; sub < count; sub += kRowTile) {
            const std::size_t k = std::min(kRowTile, count - sub);
            parallel::for_each_task(chunks, [&](std::size_t c) {
                const std::size_t sc = std::min(kSketchChunk, op_.s - c * kSketchChunk);
                thread_local std::vector<double> tile;
                tile.resize(k * sc);
                fill_tile(c, sc, row0 + sub, k, tile.data());
                kernels::gemm_tn(sc, n_, k, tile.data(), sc, rows + sub * n_, n_,
                                 out_.data() + c * kSketchChunk * n_, n_);
            });
        }
    }

    // Each input row lands in one output row; tasks own disjoint output ranges
    // and add rows in input order.
    void add_sparse(const double* rows, std::size_t row0, std::size_t count) {
        bucket_.resize(count);
        weight_.resize(count);
        for (std::size_t j = 0; j < count; ++j) {
            const SparseEntry e = sparse_entry(op_, row0 + j);
            bucket_[j] = e.bucket;
            weight_[j] = e.weight;
        }
        scatter(rows, count);
    }

    void scatter(const double* rows, std::size_t count) {
        const std::size_t parts = std::min(op_.s, std::max<std::size_t>(1, parallel::threads()));
        parallel::for_each_task(parts, [&](std::size_t p) {
            const std::uint64_t lo = op_.s * p / parts;
            const std::uint64_t hi = op_.s * (p + 1) / parts;
            for (std::size_t j = 0; j < count; ++j)
                if (bucket_[j] >= lo && bucket_[j] < hi)
                    kernels::axpy(weight_[j], rows + j * n_, out_.data() + bucket_[j] * n_, n_);
        });
    }

    void add_fct(const double* rows, std::size_t count) {
        const std::size_t t = op_.t;
        for (std::size_t j = 0; j < count; ++j) {
            pending_.insert(pending_.end(), rows + j * n_, rows + (j + 1) * n_);
            if (++pending_rows_ == t) fct_group();
        }
    }

    // One diagonal block of H: rows (H_t G; G) for the current group G, each
    // scaled by a Cauchy entry of C and routed to one output row by B.
    void fct_group() {
        const std::size_t t = op_.t;
        std::vector<double> inter(2 * t * n_);
        std::copy(pending_.begin(), pending_.end(), inter.begin());
        std::copy(pending_.begin(), pending_.end(), inter.begin() + static_cast<std::ptrdiff_t>(t * n_));
        for (std::size_t len = 1; len < t; len *= 2)
            for (std::size_t i = 0; i < t; i += 2 * len)
                for (std::size_t q = i; q < i + len; ++q) {
                    double* x = inter.data() + q * n_;
                    double* y = x + len * n_;
                    for (std::size_t c = 0; c < n_; ++c) {
                        const double a = x[c];
                        const double b = y[c];
                        x[c] = a + b;
                        y[c] = a - b;
                    }
                }
        kernels::scal(1.0 / std::sqrt(static_cast<double>(t)), inter.data(), t * n_);
        const std::size_t base = group_ * 2 * t;
        bucket_.resize(2 * t);
        weight_.resize(2 * t);
        for (std::size_t q = 0; q < 2 * t; ++q) {
            RandomStream rs(derive_stream(op_.seed, base + q));
            bucket_[q] = rs.uniform_index(op_.s);
            weight_[q] = rs.cauchy();
        }
        scatter(inter.data(), 2 * t);
        pending_.clear();
        pending_rows_ = 0;
        ++group_;
    }

    const SketchOperator& op_;
    std::size_t n_;
    DenseMatrix out_;
    std::vector<double> cas_;
    std::vector<std::uint64_t> freq_;
    std::vector<std::uint64_t> bucket_;
    std::vector<double> weight_;
    std::vector<double> pending_;
    std::size_t pending_rows_ = 0;
    std::size_t group_ = 0;
};

} // namespace

SparseEntry sparse_entry(const SketchOperator& op, std::size_t row) {
    RandomStream rs(derive_stream(op.seed, row));
    SparseEntry e;
    e.bucket = rs.uniform_index(op.s);
    switch (op.variant) {
    case SketchVariant::countsketch: e.weight = rs.rademacher(); break;
    case SketchVariant::sparse_cauchy: e.weight = rs.cauchy(); break;
    case SketchVariant::reciprocal_exp: {
        const double sign = rs.rademacher();
        e.weight = sign / rs.exponential();
        break;
    }
    default: fail(ErrorCode::InvalidArgument, "sparse_entry needs a sparse variant");
    }
    return e;
}

std::string_view to_string(SketchVariant v) noexcept {
    switch (v) {
    case SketchVariant::gaussian: return "gaussian";
    case SketchVariant::rademacher: return "rademacher";
    case SketchVariant::srdht: return "srdht";
    case SketchVariant::countsketch: return "countsketch";
    case SketchVariant::cauchy: return "cauchy";
    case SketchVariant::sparse_cauchy: return "sparse_cauchy";
    case SketchVariant::reciprocal_exp: return "reciprocal_exp";
    case SketchVariant::fast_cauchy: return "fast_cauchy";
    }
    return "?";
}

std::optional<SketchVariant> parse_variant(std::string_view s) noexcept {
    for (SketchVariant v : {SketchVariant::gaussian, SketchVariant::rademacher, SketchVariant::srdht,
                            SketchVariant::countsketch, SketchVariant::cauchy, SketchVariant::sparse_cauchy,
                            SketchVariant::reciprocal_exp, SketchVariant::fast_cauchy})
        if (s == to_string(v)) return v;
    if (s == "cw") return SketchVariant::countsketch;
    if (s == "ct") return SketchVariant::cauchy;
    if (s == "spct") return SketchVariant::sparse_cauchy;
    if (s == "ret") return SketchVariant::reciprocal_exp;
    if (s == "fct") return SketchVariant::fast_cauchy;
    return std::nullopt;
}

bool is_l1_variant(SketchVariant v) noexcept {
    return v == SketchVariant::cauchy || v == SketchVariant::sparse_cauchy || v == SketchVariant::reciprocal_exp ||
           v == SketchVariant::fast_cauchy;
}

SketchOperator SketchOperator::make(SketchVariant variant, std::size_t s, std::size_t m, SeedSpec seed,
                                    double scale_c, std::size_t t) {
    require(s >= 1 && m >= 1, ErrorCode::InvalidArgument, "sketch needs s >= 1 and m >= 1");
    require(variant != SketchVariant::srdht || s <= m, ErrorCode::InvalidArgument, "srdht needs s <= m");
    require(scale_c > 0.0 && std::isfinite(scale_c), ErrorCode::InvalidArgument, "scale_c must be positive");
    SketchOperator op;
    op.variant = variant;
    op.s = s;
    op.m = m;
    op.seed = seed;
    op.scale_c = scale_c;
    if (variant == SketchVariant::fast_cauchy) {
        op.t = t ? t : std::max<std::size_t>(16, std::bit_ceil(s));
        require(std::has_single_bit(op.t), ErrorCode::InvalidArgument, "fast_cauchy t must be a power of two");
    }
    return op;
}

DenseMatrix apply(const SketchOperator& op, RowBlockStream& a, CostLedger* ledger) {
    require(a.rows() == op.m, ErrorCode::DimensionMismatch,
            "sketch expects " + std::to_string(op.m) + " rows, got " + std::to_string(a.rows()));
    Applier ap(op, a.cols());
    a.for_each_block(ledger, [&](const RowBlock& b) { ap.add(b.data, b.row0, b.rows); }, false);
    return ap.finish();
}

DenseMatrix apply(const SketchOperator& op, const DenseMatrix& a) {
    RowBlockStream stream = RowBlockStream::from_matrix(a);
    return apply(op, stream, nullptr);
}

DenseMatrix materialize(const SketchOperator& op) { return apply(op, DenseMatrix::identity(op.m)); }

std::size_t embedding_dim_default(SketchVariant variant, std::size_t n, double eps, double delta, std::size_t m,
                                  double c1) {
    require(n >= 1, ErrorCode::InvalidArgument, "embedding_dim_default needs n >= 1");
    require(eps > 0.0 && eps < 1.0, ErrorCode::EpsOutOfRange, "eps must lie in (0, 1)");
    require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
    const double nd = static_cast<double>(n);
    const double e2 = eps * eps;
    double s = 0.0;
    switch (variant) {
    case SketchVariant::gaussian:
    case SketchVariant::rademacher: s = std::pow(std::sqrt(nd) + std::sqrt(2.0 * std::log(2.0 / delta)), 2) / e2; break;
    case SketchVariant::srdht: {
        require(m >= 1, ErrorCode::InvalidArgument, "srdht default needs m");
        s = std::min(14.0 * nd * std::log(40.0 * static_cast<double>(m) * nd) / e2, static_cast<double>(m));
        break;
    }
    case SketchVariant::countsketch: s = (nd * nd + nd) / (e2 * delta); break;
    case SketchVariant::cauchy:
    case SketchVariant::sparse_cauchy:
    case SketchVariant::reciprocal_exp: s = c1 * nd * std::log(nd); break;
    case SketchVariant::fast_cauchy: s = c1 * nd * std::log(nd / delta); break;
    }
    return std::max(n, static_cast<std::size_t>(std::ceil(s - 1e-9)));
}

} // namespace sketchreg
