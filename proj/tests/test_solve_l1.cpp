#include "sketchreg/error.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/parallel.hpp"
#include "sketchreg/precond.hpp"
#include "sketchreg/solve_l1.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

using namespace sketchreg;

namespace {

DenseMatrix augmented(const ProblemInstance& inst) {
    Vector neg_b(inst.b);
    for (double& v : neg_b) v = -v;
    return hstack(inst.a, neg_b);
}

// l1 row norms of A N, computed entry by entry.
std::vector<double> naive_row_norms(const DenseMatrix& a, const DenseMatrix& n_mat) {
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < n_mat.cols(); ++j) {
            long double v = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) v += static_cast<long double>(a(i, k)) * n_mat(k, j);
            out[i] += std::fabs(static_cast<double>(v));
        }
    return out;
}

// Lower bound on kappa_bar_1(U): alpha is exact, beta from the best of the
// probes z with ||z||_inf / ||U z||_1.
double kappa_bar_lower(const DenseMatrix& u, std::size_t probes, std::uint64_t seed) {
    double alpha = 0.0;
    for (double v : u.values()) alpha += std::fabs(v);
    double beta = 0.0;
    for (std::size_t t = 0; t < probes; ++t) {
        std::vector<double> z = testutil::gaussian_vec(u.cols(), seed + t);
        if (t < u.cols()) {
            std::fill(z.begin(), z.end(), 0.0);
            z[t] = 1.0;
        }
        double zinf = 0.0;
        for (double v : z) zinf = std::max(zinf, std::fabs(v));
        double uz = 0.0;
        for (std::size_t i = 0; i < u.rows(); ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < u.cols(); ++j) r += u(i, j) * z[j];
            uz += std::fabs(r);
        }
        beta = std::max(beta, zinf / uz);
    }
    return alpha * beta;
}

ProblemInstance nb_l1(std::size_t m, std::size_t n, std::uint64_t seed) {
    ProblemInstance inst = generate(Family::NB, m, n, 1e6, seed);
    attach_l1_optimum(inst);
    return inst;
}

} // namespace

TEST_CASE("sample size formula matches the closed form") {
    const long double expect = 16.0L * 4.0L * 10.0L * (5.0L * std::log(120.0L) + std::log(20.0L)) / 0.01L;
    CHECK(sample_size_l1(10.0, 5, 0.1, 0.1) == doctest::Approx(std::ceil(static_cast<double>(expect))).epsilon(1e-12));
    // Linear in kappa: the ceilings differ by at most one.
    const double s10 = sample_size_l1(10.0, 5, 0.1, 0.1);
    const double s20 = sample_size_l1(20.0, 5, 0.1, 0.1);
    CHECK(std::fabs(s20 - 2.0 * s10) <= 2.0);
    // p = 2 over p = 1: (2^2 + 2) kappa^2 / 4 over (2 + 2) kappa = 3 kappa / 8.
    const double s2 = sample_size_l1(10.0, 5, 0.1, 0.1, 2.0);
    CHECK(s2 / s10 == doctest::Approx(30.0 / 8.0).epsilon(1e-6));
    auto code_of = [](double eps) {
        try {
            sample_size_l1(10.0, 5, eps, 0.1);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    CHECK(code_of(0.2) == ErrorCode::EpsOutOfRange);
    CHECK(code_of(1.0 / 7.0) == ErrorCode::EpsOutOfRange);
    CHECK(code_of(0.0) == ErrorCode::EpsOutOfRange);
    CHECK(sample_size_l1(10.0, 5, 0.14, 0.1) > 0.0);
}

TEST_CASE("Cauchy conditioning of an orthonormal basis stays within 20 n") {
    const std::size_t m = 4000, n = 8;
    const DenseMatrix q = qr_factor(testutil::gaussian(m, n, 41)).q;
    const std::size_t s = static_cast<std::size_t>(std::ceil(4.0 * n * std::log(static_cast<double>(n))));
    int good = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RowBlockStream st = RowBlockStream::from_matrix(q, 1000);
        CostLedger ledger;
        const Preconditioner p = condition_l1(st, SketchVariant::cauchy, s, derive_stream(seed, 3), &ledger);
        CHECK(ledger.passes == 1);
        const DenseMatrix u = p.right_multiply(q);
        // The scale of N is free; kappa_bar is scale invariant.
        good += kappa_bar_lower(u, 4 * n, 100 + seed) <= 20.0 * n;
    }
    CHECK(good == 5);
}

TEST_CASE("conditioning factor has a positive diagonal") {
    const std::size_t n = 6;
    const DenseMatrix a = testutil::gaussian(500, n, 12);
    for (SketchVariant v : {SketchVariant::cauchy, SketchVariant::sparse_cauchy, SketchVariant::fast_cauchy}) {
        RowBlockStream st = RowBlockStream::from_matrix(a);
        const Preconditioner p = condition_l1(st, v, 4 * n, derive_stream(7, 0));
        const DenseMatrix nm = p.n_matrix();
        for (std::size_t j = 0; j < n; ++j) CHECK(nm(j, j) > 0.0);
    }
}

TEST_CASE("equal row norms give uniform probabilities") {
    // Rows of a Hadamard-type sign matrix all have l1 norm n.
    const std::size_t m = 64, n = 4;
    DenseMatrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = (std::popcount(i & (std::size_t{1} << j)) % 2) ? -1.0 : 1.0;
    RowBlockStream st = RowBlockStream::from_matrix(a, 10);
    const Preconditioner id = qr_precond(DenseMatrix::identity(n), "identity");
    CostLedger ledger;
    const SamplingDistribution d = l1_sampling_distribution(st, id, 16, {}, &ledger);
    CHECK(ledger.passes == 1);
    for (std::size_t i = 0; i < m; ++i) {
        CHECK(d.base_norms[i] == doctest::Approx(static_cast<double>(n)).epsilon(1e-14));
        CHECK(d.probs[i] == doctest::Approx(16.0 / m).epsilon(1e-14));
    }
}

TEST_CASE("distribution rules match their formulas") {
    const ProblemInstance inst = generate(Family::UG, 3000, 10, 1e6, 2);
    const DenseMatrix abar = augmented(inst);
    RowBlockStream st = RowBlockStream::from_matrix(abar, 700);
    const Preconditioner p = condition_l1(st, SketchVariant::sparse_cauchy, 0, derive_stream(5, 0));
    const std::vector<double> w = naive_row_norms(abar, p.n_matrix());
    double total = 0.0;
    for (double v : w) total += v;
    const std::size_t s = 400;

    const SamplingDistribution plain = l1_sampling_distribution(st, p, s);
    L1SamplingOptions mapper;
    mapper.mapper_kappa = 50.0;
    const SamplingDistribution mapped = l1_sampling_distribution(st, p, s, mapper);
    CHECK(mapped.kappa_bar_used == 50.0);
    for (std::size_t i = 0; i < abar.rows(); ++i) {
        CHECK(plain.base_norms[i] == doctest::Approx(w[i]).epsilon(1e-10));
        CHECK(plain.probs[i] == doctest::Approx(std::min(1.0, s * w[i] / total)).epsilon(1e-10));
        const double qm = std::min(1.0, s * w[i] / (50.0 * std::sqrt(static_cast<double>(abar.cols()))));
        CHECK(mapped.probs[i] == doctest::Approx(qm).epsilon(1e-10));
    }

    L1SamplingOptions sized;
    sized.expected_size = true;
    const SamplingDistribution calibrated = l1_sampling_distribution(st, p, s, sized);
    double sum = 0.0;
    for (double q : calibrated.probs) sum += q;
    CHECK(sum == doctest::Approx(static_cast<double>(s)).epsilon(1e-9));
}

TEST_CASE("expected size scale solves the capped sum") {
    const std::vector<double> w{1.0, 2.0, 4.0, 8.0, 0.0};
    // t = 1/8 caps only the last weight: 1/8 + 2/8 + 4/8 + 1 = 1.875.
    CHECK(expected_size_scale(w, 1.875) == doctest::Approx(0.125).epsilon(1e-12));
    // t = 1/4 caps two: 1/4 + 2/4 + 1 + 1 = 2.75.
    CHECK(expected_size_scale(w, 2.75) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(std::isinf(expected_size_scale(w, 4.0)));
    CHECK(expected_size_scale(w, 0.15) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("fast norm estimates track the exact norms") {
    const ProblemInstance inst = generate(Family::NB, 10000, 20, 1e6, 1);
    const DenseMatrix abar = augmented(inst);
    RowBlockStream st = RowBlockStream::from_matrix(abar);
    const Preconditioner p = condition_l1(st, SketchVariant::sparse_cauchy, 0, derive_stream(0, 1));
    L1SamplingOptions exact;
    exact.expected_size = true;
    L1SamplingOptions fast = exact;
    fast.fast = true;
    fast.seed = derive_stream(9, 0);
    const SamplingDistribution de = l1_sampling_distribution(st, p, 2000, exact);
    const SamplingDistribution df = l1_sampling_distribution(st, p, 2000, fast);
    std::size_t within = 0;
    for (std::size_t i = 0; i < abar.rows(); ++i) {
        const double r = de.probs[i] / df.probs[i];
        within += r <= 3.0 && r >= 1.0 / 3.0;
    }
    CHECK(static_cast<double>(within) >= 0.95 * abar.rows());
}

TEST_CASE("coherent rows outrank the bulk") {
    // The identity block of NB spans directions no other row touches, so
    // its rows carry a large share of the conditioned norm.
    const std::size_t m = 1000, n = 20;
    const ProblemInstance inst = generate(Family::NB, m, n, 1e6, 1);
    const DenseMatrix abar = augmented(inst);
    RowBlockStream st = RowBlockStream::from_matrix(abar);
    const Preconditioner p = condition_l1(st, SketchVariant::sparse_cauchy, 0, derive_stream(1, 1));
    L1SamplingOptions opt;
    opt.expected_size = true;
    const SamplingDistribution d = l1_sampling_distribution(st, p, 4 * n, opt);
    const double med = testutil::median(std::vector<double>(d.probs.begin(), d.probs.end()));
    for (std::size_t i = m - n / 2; i < m; ++i) CHECK(d.probs[i] > 10.0 * med);
}

TEST_CASE("consistent systems are recovered exactly") {
    ProblemInstance inst = generate(Family::UG, 2000, 6, 1e6, 3);
    const Vector x0 = testutil::gaussian_vec(6, 77);
    inst.b = matvec(inst.a, x0);
    inst.norm = NormKind::l1;
    inst.x_star = x0;
    inst.f_star = 0.0;
    L1Config cfg;
    cfg.seed = 4;
    const L1Run run = solve_l1_low_precision(inst, cfg, 3);
    for (const SolveReport& rep : run.queries) CHECK(relative_error(rep.x_hat, x0) <= 1e-8);
}

TEST_CASE("low precision l1 on a small coherent instance") {
    const std::size_t m = 1200, n = 6;
    ProblemInstance inst = generate(Family::NB, m, n, 1e6, 5);
    // Independent optimum by vertex exchange.
    std::vector<double> x_ref;
    const double f_ref = testutil::l1_exchange(inst.a, inst.b, &x_ref);
    attach_l1_optimum(inst);
    CHECK(*inst.f_star == doctest::Approx(f_ref).epsilon(1e-7));
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        L1Config cfg;
        cfg.seed = seed;
        cfg.block_rows = 300;
        const L1Run run = solve_l1_low_precision(inst, cfg, 5);
        CHECK(run.ledger.passes == 2);
        CHECK(run.objective_ledger.passes == 1);
        CHECK(run.queries[0].ledger.passes == 3);
        CHECK(run.s == std::min<std::size_t>(static_cast<std::size_t>(run.theory_s), 100 * n));
        double best = HUGE_VAL;
        for (const SolveReport& rep : run.queries) {
            const double f = testutil::l1_objective(inst.a, inst.b, rep.x_hat);
            CHECK(rep.f_hat == doctest::Approx(f).epsilon(1e-10));
            CHECK(f >= f_ref * (1.0 - 1e-9));
            best = std::min(best, (f - f_ref) / f_ref);
        }
        CHECK(best <= 0.05);
    }
}

TEST_CASE("queries form a prefix family and best-of improves") {
    const ProblemInstance inst = nb_l1(5000, 10, 2);
    L1Config cfg;
    cfg.seed = 11;
    const L1Run three = solve_l1_low_precision(inst, cfg, 3);
    const L1Run six = solve_l1_low_precision(inst, cfg, 6);
    for (std::size_t k = 0; k < 3; ++k) CHECK(three.queries[k].x_hat == six.queries[k].x_hat);
    double best = HUGE_VAL;
    for (const SolveReport& rep : six.queries) {
        const double next = std::min(best, *rep.rel_err_f);
        CHECK(next <= best);
        best = next;
    }
    // Expected-size calibration: each sample size sits near s.
    for (std::size_t rows : six.sample_rows)
        CHECK(std::fabs(static_cast<double>(rows) - six.s) <= 4.0 * std::sqrt(static_cast<double>(six.s)));
}

TEST_CASE("weighted sample preserves l1 norms on the column space") {
    const ProblemInstance inst = generate(Family::NB, 3000, 10, 1e6, 6);
    const DenseMatrix abar = augmented(inst);
    RowBlockStream st = RowBlockStream::from_matrix(abar);
    const Preconditioner p = condition_l1(st, SketchVariant::sparse_cauchy, 0, derive_stream(6, 1));
    L1SamplingOptions opt;
    opt.expected_size = true;
    const SamplingDistribution d = l1_sampling_distribution(st, p, 100 * 11, opt);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rs(derive_stream(seed, 0x77));
        std::vector<double> w(abar.rows(), 0.0);
        for (std::size_t i = 0; i < abar.rows(); ++i)
            if (rs.uniform() < d.probs[i]) w[i] = 1.0 / d.probs[i];
        bool ok = true;
        for (std::size_t t = 0; t < 100; ++t) {
            const Vector y = matvec(abar, testutil::gaussian_vec(abar.cols(), 1000 * seed + t));
            double full = 0.0, part = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                full += std::fabs(y[i]);
                part += w[i] * std::fabs(y[i]);
            }
            ok = ok && part >= 0.5 * full && part <= 1.5 * full;
        }
        good += ok;
    }
    CHECK(good >= 18);
}

TEST_CASE("l1 pipeline is thread invariant") {
    const ProblemInstance inst = nb_l1(4000, 10, 8);
    L1Config cfg;
    cfg.seed = 3;
    cfg.block_rows = 500;
    parallel::set_threads(1);
    const L1Run a = solve_l1_low_precision(inst, cfg, 3);
    parallel::set_threads(3);
    const L1Run b = solve_l1_low_precision(inst, cfg, 3);
    parallel::set_threads(1);
    REQUIRE(a.queries.size() == b.queries.size());
    for (std::size_t k = 0; k < a.queries.size(); ++k) {
        CHECK(a.queries[k].x_hat == b.queries[k].x_hat);
        CHECK(a.queries[k].f_hat == b.queries[k].f_hat);
    }
    CHECK(a.ledger == b.ledger);
}
