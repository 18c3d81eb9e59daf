#include "sketchreg/error.hpp"
#include "sketchreg/l1core.hpp"
#include "sketchreg/linalg.hpp"
#include "sketchreg/matrixgen.hpp"
#include "sketchreg/passio.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

using namespace sketchreg;

namespace {

// Exact leverage scores as squared row norms of an orthonormal basis.
Vector leverage_of(const DenseMatrix& a) {
    const DenseMatrix q = qr_factor(a).q;
    Vector l(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) l[i] = dot(q.row(i), q.row(i));
    return l;
}

double ls_residual(const DenseMatrix& a, const Vector& b) {
    const QrFactors f = householder_qr(a);
    const Vector x = solve_upper(f.r, matvec_t(f.q, b));
    return norm2(subtract(b, matvec(a, x)));
}

} // namespace

TEST_CASE("gen_uniform condition numbers") {
    CHECK(std::abs(cond2(gen_uniform(1000, 20, 5.0, 1).a) - 5.0) <= 1e-6);
    const ProblemInstance ub = gen_uniform(1000, 20, 1e6, 2);
    CHECK(std::abs(cond2(ub.a) / 1e6 - 1.0) <= 1e-6);
    CHECK(ub.family == Family::UB);
}

TEST_CASE("gen_uniform right-hand side, optimum and leverage") {
    const ProblemInstance inst = gen_uniform(1000, 20, 5.0, 3);
    const double bn = norm2(inst.b);
    // Residual fraction of the 0.25 noise injection; the optimum absorbs only the
    // in-range part of the noise, which is about sqrt(n/m) of it.
    CHECK(std::abs(*inst.f_star / bn - 0.25 / std::sqrt(1.0 + 0.0625)) <= 0.05);
    CHECK(std::abs(ls_residual(inst.a, inst.b) - *inst.f_star) <= 1e-10 * *inst.f_star);
    CHECK(inst.mass_fraction >= 0.0);
    CHECK(inst.mass_fraction <= 1.0);
    CHECK(inst.mass_fraction == doctest::Approx(std::sqrt(1.0 - std::pow(*inst.f_star / bn, 2))).epsilon(1e-10));
    const Vector lev = leverage_of(inst.a);
    CHECK(*std::max_element(lev.begin(), lev.end()) <= 5.0 * 20.0 / 1000.0);
}

TEST_CASE("gen_nonuniform leverage structure") {
    const double alpha = calibrate_alpha(1000, 20, 5.0, 4);
    const ProblemInstance inst = gen_nonuniform(1000, 20, alpha, 4);
    CHECK(inst.family == Family::NG);
    CHECK(cond2(inst.a) == doctest::Approx(5.0).epsilon(1e-6));
    const Vector lev = leverage_of(inst.a);
    for (std::size_t i = 990; i < 1000; ++i) CHECK(std::abs(lev[i] - 1.0) <= 1e-10);
    const double expect = 10.0 / 990.0;
    // Gaussian-block scores scatter like chi^2_10 / 990 around their exact mean,
    // so the factor-3 band is asserted for the median and for 95% of rows.
    const Vector head(lev.begin(), lev.begin() + 990);
    double sum = 0.0;
    std::size_t inside = 0;
    for (double l : head) {
        sum += l;
        inside += l <= 3.0 * expect && l >= expect / 3.0;
    }
    CHECK(sum / 990.0 == doctest::Approx(expect).epsilon(1e-10));
    const double med = testutil::median(head);
    CHECK(med <= 3.0 * expect);
    CHECK(med >= expect / 3.0);
    CHECK(static_cast<double>(inside) >= 0.95 * 990.0);
    // Structure: zero block and identity block, tiny R.
    CHECK(inst.a(995, 5) == 0.0);
    CHECK(inst.a(995, 15) == 1.0);
    CHECK(std::abs(inst.a(3, 12)) <= 1e-8);
}

TEST_CASE("NB calibration reaches the condition target") {
    const ProblemInstance nb = generate(Family::NB, 2000, 20, 1e6, 5);
    CHECK(nb.family == Family::NB);
    CHECK(std::abs(cond2(nb.a) / 1e6 - 1.0) <= 0.05);
    CHECK(std::abs(cond2(nb.a) / 1e6 - 1.0) <= 1e-6);
    CHECK(std::abs(ls_residual(nb.a, nb.b) - *nb.f_star) <= 1e-10 * *nb.f_star);
    CHECK_THROWS_AS(calibrate_alpha(2000, 20, 1.01, 5), Error);
}

TEST_CASE("STACK1 divides leverage and keeps the optimum") {
    const ProblemInstance nb = generate(Family::NB, 2500, 20, 1e6, 6);
    const ProblemInstance st = stack(nb, 40, StackMode::stack1);
    REQUIRE(st.a.rows() == 100000);
    const Vector lev = leverage_of(st.a);
    CHECK(std::abs(*std::max_element(lev.begin(), lev.end()) - 1.0 / 40.0) <= 1e-8);
    CHECK(std::abs(cond2(st.a) / cond2(nb.a) - 1.0) <= 1e-8);
    CHECK(*st.x_star == *nb.x_star);
    CHECK(std::abs(ls_residual(st.a, st.b) - *st.f_star) <= 1e-10 * *st.f_star);
    CHECK(st.mass_fraction == nb.mass_fraction);
    for (std::size_t i = 0; i < nb.a.rows(); ++i) CHECK(st.b[39 * 2500 + i] == nb.b[i]);
}

TEST_CASE("STACK2 keeps coherence one") {
    const ProblemInstance nb = generate(Family::NB, 500, 10, 1e6, 7);
    const ProblemInstance st = stack(nb, 8, StackMode::stack2);
    REQUIRE(st.a.rows() == 8 * 495 + 5);
    const Vector lev = leverage_of(st.a);
    CHECK(std::abs(*std::max_element(lev.begin(), lev.end()) - 1.0) <= 1e-10);
    CHECK(cond2(st.a) > cond2(nb.a));
    const Vector x = min_length_solve(st.a, st.b);
    CHECK(relative_error(*st.x_star, x) <= 1e-8);
    CHECK(std::abs(ls_residual(st.a, st.b) - *st.f_star) <= 1e-10 * *st.f_star);
}

TEST_CASE("STACK2 is illegal on uniform families") {
    const ProblemInstance ug = gen_uniform(200, 5, 5.0, 8);
    try {
        (void)stack(ug, 4, StackMode::stack2);
        FAIL("expected IllegalStack");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IllegalStack);
    }
    CHECK_NOTHROW((void)stack(ug, 4, StackMode::stack1));
}

TEST_CASE("l1 instances and stacking") {
    ProblemInstance ng = generate(Family::NG, 400, 6, 5.0, 9);
    attach_l1_optimum(ng);
    CHECK(ng.norm == NormKind::l1);
    CHECK(*ng.f_star == doctest::Approx(testutil::l1_exchange(ng.a, ng.b)).epsilon(1e-6));
    const ProblemInstance s1 = stack(ng, 3, StackMode::stack1);
    CHECK(*s1.f_star == doctest::Approx(3.0 * *ng.f_star).epsilon(1e-12));
    const ProblemInstance s2 = stack(ng, 3, StackMode::stack2);
    CHECK(*s2.f_star == doctest::Approx(testutil::l1_exchange(s2.a, s2.b)).epsilon(1e-6));
}

TEST_CASE("write_stacked matches the in-memory stack") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string pa = (dir / "sketchreg_gen_a.rnla").string();
    const std::string pb = (dir / "sketchreg_gen_b.rnla").string();
    const ProblemInstance nb = generate(Family::NB, 300, 8, 1e4, 10);
    for (StackMode mode : {StackMode::stack1, StackMode::stack2}) {
        const ProblemInstance mem = stack(nb, 5, mode);
        const ProblemInstance meta = write_stacked(nb, 5, mode, pa, pb);
        CHECK(read_matrix(pa) == mem.a);
        CHECK(read_vector(pb) == mem.b);
        CHECK(*meta.x_star == *mem.x_star);
        CHECK(*meta.f_star == *mem.f_star);
        CHECK(meta.a.empty());
    }
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    const ProblemInstance a = generate(Family::UG, 300, 6, 5.0, 11);
    const ProblemInstance b = generate(Family::UG, 300, 6, 5.0, 11);
    const ProblemInstance c = generate(Family::UG, 300, 6, 5.0, 12);
    CHECK(a.a == b.a);
    CHECK(a.b == b.b);
    CHECK_FALSE(a.a == c.a);
    CHECK(parse_family("NB") == Family::NB);
    CHECK(parse_stack("STACK2") == StackMode::stack2);
    CHECK_FALSE(parse_family("XX").has_value());
}
