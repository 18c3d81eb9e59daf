#include "sketchreg/error.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/parallel.hpp"
#include "sketchreg/sketch.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

using namespace sketchreg;

namespace {

const SketchVariant kAll[] = {SketchVariant::gaussian,      SketchVariant::rademacher,     SketchVariant::srdht,
                              SketchVariant::countsketch,   SketchVariant::cauchy,         SketchVariant::sparse_cauchy,
                              SketchVariant::reciprocal_exp, SketchVariant::fast_cauchy};

SketchOperator make_op(SketchVariant v, std::size_t s, std::size_t m, std::uint64_t seed) {
    return SketchOperator::make(v, s, m, derive_stream(seed, 0));
}

// max ||Phi y|| / ||y|| divided by min over probe vectors y = A x.
double distortion(const DenseMatrix& a, const DenseMatrix& sa, double p, std::uint64_t seed) {
    double lo = HUGE_VAL;
    double hi = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        const Vector x = testutil::gaussian_vec(a.cols(), seed * 1000 + k);
        const Vector y = matvec(a, x);
        const Vector py = matvec(sa, x);
        const double r = p == 1.0 ? norm1(py) / norm1(y) : norm2(py) / norm2(y);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return hi / lo;
}

// Sylvester Hadamard matrix normalized by 1/sqrt(t).
DenseMatrix hadamard(std::size_t t) {
    DenseMatrix h(t, t);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j) h(i, j) = (std::popcount(i & j) % 2 ? -1.0 : 1.0) / std::sqrt(double(t));
    return h;
}

} // namespace

TEST_CASE("countsketch columns are signed basis vectors") {
    const SketchOperator op = make_op(SketchVariant::countsketch, 17, 300, 1);
    const DenseMatrix phi = materialize(op);
    for (std::size_t j = 0; j < 300; ++j) {
        double abs_sum = 0.0;
        std::size_t nnz = 0;
        for (std::size_t i = 0; i < 17; ++i) {
            abs_sum += std::abs(phi(i, j));
            nnz += phi(i, j) != 0.0;
        }
        CHECK(nnz == 1);
        CHECK(abs_sum == 1.0);
        const SparseEntry e = sparse_entry(op, j);
        CHECK(phi(e.bucket, j) == e.weight);
    }
}

TEST_CASE("countsketch buckets are uniform (chi-square)") {
    const std::size_t s = 100;
    const SketchOperator op = make_op(SketchVariant::countsketch, s, 100000, 2);
    std::vector<double> count(s, 0.0);
    for (std::size_t j = 0; j < 100000; ++j) count[sparse_entry(op, j).bucket] += 1.0;
    double chi2 = 0.0;
    for (double c : count) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    // Upper 1% point of chi-square with 99 degrees of freedom.
    CHECK(chi2 < 134.642);
}

TEST_CASE("Gaussian sketch preserves norms of range vectors") {
    const DenseMatrix a = testutil::gaussian(10000, 10, 3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const DenseMatrix sa = apply(make_op(SketchVariant::gaussian, 400, 10000, seed), a);
        int good = 0;
        for (std::size_t k = 0; k < 20; ++k) {
            const Vector x = testutil::gaussian_vec(10, 500 + k);
            const double r = norm2(matvec(sa, x)) / norm2(matvec(a, x));
            good += std::abs(r - 1.0) <= 0.25;
        }
        CHECK(good >= 19);
    }
}

TEST_CASE("full SRDHT is orthogonal and subsamples scale consistently") {
    for (std::size_t m : {256u, 300u}) {
        const DenseMatrix full = materialize(make_op(SketchVariant::srdht, m, m, 4));
        CHECK(max_abs_diff(testutil::gram(full), DenseMatrix::identity(m)) <= 1e-12);
        const Vector x = testutil::gaussian_vec(m, 5);
        CHECK(std::abs(norm2(matvec(full, x)) / norm2(x) - 1.0) <= 1e-12);
        for (double e : full.values()) CHECK(std::abs(e) <= std::sqrt(2.0 / double(m)) + 1e-15);
        // The s-row operator samples the first s rows of the same permutation.
        const std::size_t s = m / 4;
        const DenseMatrix part = materialize(make_op(SketchVariant::srdht, s, m, 4));
        const double scale = std::sqrt(double(m) / double(s));
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(part(i, j) - scale * full(i, j)) <= 1e-14);
    }
}

TEST_CASE("SRDHT entries follow the cas kernel") {
    const std::size_t m = 60;
    const DenseMatrix phi = materialize(make_op(SketchVariant::srdht, m, m, 6));
    // Each row is d_j cas(2 pi q j / m) / sqrt(m) for some frequency q, with a
    // common sign vector d: column 0 has cas(0) = 1, so d_0 = sign(phi(i, 0)).
    const double d0 = phi(0, 0) > 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        bool found = false;
        for (std::size_t q = 0; q < m && !found; ++q) {
            bool match = true;
            for (std::size_t j = 0; j < m && match; ++j) {
                const double th = 2.0 * std::numbers::pi * double(q * j % m) / double(m);
                const double ref = (std::cos(th) + std::sin(th)) / std::sqrt(double(m));
                match = std::abs(std::abs(phi(i, j)) - std::abs(ref)) <= 1e-13;
            }
            found = match;
        }
        CHECK(found);
        CHECK(std::abs(phi(i, 0)) * std::sqrt(double(m)) == doctest::Approx(1.0));
        CHECK((phi(i, 0) > 0 ? 1.0 : -1.0) == d0);
    }
}

TEST_CASE("fast Cauchy equals 4 B C H built explicitly") {
    const std::size_t m = 40, s = 12, t = 16;
    const SketchOperator op = SketchOperator::make(SketchVariant::fast_cauchy, s, m, derive_stream(7, 0), 1.0, t);
    const DenseMatrix phi = materialize(op);
    const DenseMatrix ht = hadamard(t);
    const std::size_t groups = (m + t - 1) / t; // zero-padded to a multiple of t
    DenseMatrix ref(s, m);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t q = 0; q < 2 * t; ++q) {
            RandomStream rs(derive_stream(op.seed, g * 2 * t + q));
            const std::size_t h = rs.uniform_index(s);
            const double c = rs.cauchy();
            for (std::size_t k = 0; k < t; ++k) {
                const std::size_t col = g * t + k;
                if (col >= m) continue;
                const double hval = q < t ? ht(q, k) : (q - t == k ? 1.0 : 0.0);
                ref(h, col) += 4.0 * c * hval;
            }
        }
    CHECK(max_abs_diff(phi, ref) <= 1e-12 * (1.0 + frobenius(ref)));
}

TEST_CASE("dense Cauchy and reciprocal exponential scaling") {
    const std::size_t m = 50, s = 8;
    SketchOperator op = SketchOperator::make(SketchVariant::cauchy, s, m, derive_stream(8, 0), 3.0);
    const DenseMatrix c3 = materialize(op);
    op.scale_c = 1.0;
    const DenseMatrix c1 = materialize(op);
    for (std::size_t k = 0; k < c1.size(); ++k) CHECK(c3.data()[k] == doctest::Approx(3.0 * c1.data()[k]));
    // Entry (i, j) of the unit-scale operator times s is a standard Cauchy draw.
    RandomStream rs(derive_stream(derive_stream(op.seed, 5), 0));
    Vector col(s);
    rs.fill_cauchy(col);
    for (std::size_t i = 0; i < s; ++i) CHECK(c1(i, 5) * double(s) == doctest::Approx(col[i]).epsilon(1e-14));
    const SketchOperator ret = make_op(SketchVariant::reciprocal_exp, s, m, 9);
    const DenseMatrix r = materialize(ret);
    for (std::size_t j = 0; j < m; ++j) {
        const SparseEntry e = sparse_entry(ret, j);
        CHECK(r(e.bucket, j) == e.weight);
        CHECK(std::abs(e.weight) > 0.0);
    }
}

TEST_CASE("streaming equals in-memory bitwise for every variant") {
    const DenseMatrix a = testutil::gaussian(1000, 7, 10);
    const auto path = (std::filesystem::temp_directory_path() / "sketchreg_sketch.rnla").string();
    write_matrix(path, a);
    for (SketchVariant v : kAll) {
        CAPTURE(to_string(v));
        const SketchOperator op = make_op(v, 300, 1000, 11);
        const DenseMatrix ref = apply(op, a);
        for (std::size_t br : {7u, 64u, 999u, 5000u}) {
            RowBlockStream mem = RowBlockStream::from_matrix(a, br);
            CostLedger ledger;
            CHECK(apply(op, mem, &ledger) == ref);
            CHECK(ledger.passes == 1);
            RowBlockStream file = RowBlockStream::from_file(path, br);
            CHECK(apply(op, file) == ref);
        }
        parallel::set_threads(3);
        CHECK(apply(op, a) == ref);
        parallel::set_threads(1);
        CHECK(apply(op, a) == ref);
    }
    std::filesystem::remove(path);
}

TEST_CASE("sketches are linear and repeatable") {
    const DenseMatrix a = testutil::gaussian(500, 4, 12);
    const DenseMatrix b = testutil::gaussian(500, 4, 13);
    DenseMatrix c(500, 4);
    for (std::size_t k = 0; k < c.size(); ++k) c.data()[k] = 2.0 * a.data()[k] - 0.5 * b.data()[k];
    for (SketchVariant v : kAll) {
        CAPTURE(to_string(v));
        const SketchOperator op = make_op(v, 64, 500, 14);
        const DenseMatrix pa = apply(op, a);
        const DenseMatrix pb = apply(op, b);
        const DenseMatrix pc = apply(op, c);
        DenseMatrix lin(pa.rows(), 4);
        for (std::size_t k = 0; k < lin.size(); ++k) lin.data()[k] = 2.0 * pa.data()[k] - 0.5 * pb.data()[k];
        CHECK(max_abs_diff(pc, lin) <= 1e-12 * (1.0 + frobenius(lin)));
        CHECK(apply(op, a) == pa);
    }
}

TEST_CASE("subspace embedding quality at default sizes") {
    const ProblemInstance nb = generate(Family::NB, 2000, 10, 1e6, 15);
    for (SketchVariant v : {SketchVariant::gaussian, SketchVariant::rademacher, SketchVariant::srdht,
                            SketchVariant::countsketch}) {
        CAPTURE(to_string(v));
        const std::size_t s = embedding_dim_default(v, 10, 0.5, 0.1, 2000);
        int good = 0;
        for (std::uint64_t seed = 0; seed < 50; ++seed)
            good += distortion(nb.a, apply(make_op(v, s, 2000, seed), nb.a), 2.0, seed) <= 3.0;
        CHECK(good >= 45);
    }
    // Cauchy in l1: finite distortion bounded by c n ln n with c = 4.
    const std::size_t s = embedding_dim_default(SketchVariant::cauchy, 10, 0.5, 0.1);
    const double bound = 4.0 * 10.0 * std::log(10.0);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const double d = distortion(nb.a, apply(make_op(SketchVariant::cauchy, s, 2000, seed), nb.a), 1.0, seed);
        CHECK(std::isfinite(d));
        good += d <= bound;
    }
    CHECK(good >= 45);
}

TEST_CASE("embedding_dim_default formulas") {
    CHECK(embedding_dim_default(SketchVariant::countsketch, 10, 0.5, 0.5) == 880);
    const double g = std::pow(std::sqrt(10.0) + std::sqrt(2.0 * std::log(2.0 / 0.1)), 2) / 0.25;
    CHECK(embedding_dim_default(SketchVariant::gaussian, 10, 0.5, 0.1) == std::size_t(std::ceil(g)));
    CHECK(embedding_dim_default(SketchVariant::cauchy, 10, 0.5, 0.1) == std::size_t(std::ceil(40.0 * std::log(10.0))));
    CHECK(embedding_dim_default(SketchVariant::cauchy, 10, 0.5, 0.1, 0, 2.0) ==
          std::size_t(std::ceil(20.0 * std::log(10.0))));
    const double h = 14.0 * 10.0 * std::log(40.0 * 1e6 * 10.0) / 0.25;
    CHECK(embedding_dim_default(SketchVariant::srdht, 10, 0.5, 0.1, 1000000) == std::size_t(std::ceil(h)));
    CHECK(embedding_dim_default(SketchVariant::srdht, 10, 0.5, 0.1, 500) == 500);
    CHECK_THROWS_AS(embedding_dim_default(SketchVariant::gaussian, 10, 1.5, 0.1), Error);
}

TEST_CASE("sketch errors") {
    const SketchOperator op = make_op(SketchVariant::gaussian, 5, 10, 16);
    try {
        (void)apply(op, DenseMatrix(11, 2));
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    CHECK_THROWS_AS(SketchOperator::make(SketchVariant::srdht, 11, 10, {}), Error);
    CHECK_THROWS_AS(SketchOperator::make(SketchVariant::fast_cauchy, 4, 10, {}, 1.0, 12), Error);
    CHECK(SketchOperator::make(SketchVariant::fast_cauchy, 40, 100, {}).t == 64);
    CHECK(parse_variant("cw") == SketchVariant::countsketch);
    CHECK(is_l1_variant(SketchVariant::reciprocal_exp));
    CHECK_FALSE(is_l1_variant(SketchVariant::srdht));
}
