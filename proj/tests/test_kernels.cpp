#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace sketchreg;
namespace k = sketchreg::kernels;

namespace {

std::vector<k::Isa> available() {
    std::vector<k::Isa> out;
    for (k::Isa isa : {k::Isa::scalar, k::Isa::avx2, k::Isa::avx512})
        if (k::isa_supported(isa)) out.push_back(isa);
    return out;
}

struct IsaGuard {
    k::Isa saved = k::active_isa();
    ~IsaGuard() { k::set_isa(saved); }
};

} // namespace

TEST_CASE("isa names round-trip") {
    for (k::Isa isa : {k::Isa::scalar, k::Isa::avx2, k::Isa::avx512}) CHECK(k::parse_isa(k::isa_name(isa)) == isa);
    CHECK_FALSE(k::parse_isa("sse9").has_value());
    CHECK(k::isa_supported(k::Isa::scalar));
}

TEST_CASE("vector kernels are bitwise identical across instruction sets") {
    IsaGuard guard;
    for (std::size_t n : {0u, 1u, 7u, 15u, 16u, 17u, 31u, 100u, 1003u}) {
        const Vector x = testutil::gaussian_vec(n, 1 + n);
        const Vector y = testutil::gaussian_vec(n, 2 + n);
        k::set_isa(k::Isa::scalar);
        const double d0 = k::dot(x.data(), y.data(), n);
        const double a0 = k::asum(x.data(), n);
        Vector ax0 = y;
        k::axpy(0.37, x.data(), ax0.data(), n);
        Vector sc0 = x;
        k::scal(-1.3, sc0.data(), n);
        Vector rx0 = x, ry0 = y;
        k::rot(rx0.data(), ry0.data(), n, 0.8, 0.6);
        for (k::Isa isa : available()) {
            k::set_isa(isa);
            CAPTURE(k::isa_name(isa));
            CAPTURE(n);
            CHECK(k::dot(x.data(), y.data(), n) == d0);
            CHECK(k::asum(x.data(), n) == a0);
            Vector ax = y;
            k::axpy(0.37, x.data(), ax.data(), n);
            CHECK(ax == ax0);
            Vector sc = x;
            k::scal(-1.3, sc.data(), n);
            CHECK(sc == sc0);
            Vector rx = x, ry = y;
            k::rot(rx.data(), ry.data(), n, 0.8, 0.6);
            CHECK(rx == rx0);
            CHECK(ry == ry0);
        }
    }
}

TEST_CASE("dot matches a long-double oracle") {
    const Vector x = testutil::gaussian_vec(999, 5);
    const Vector y = testutil::gaussian_vec(999, 6);
    long double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<long double>(x[i]) * y[i];
    CHECK(std::fabs(k::dot(x.data(), y.data(), x.size()) - static_cast<double>(s)) < 1e-12);
}

TEST_CASE("gemm variants are bitwise identical and match the naive product") {
    IsaGuard guard;
    const std::size_t shapes[][3] = {{1, 1, 1}, {5, 3, 2}, {17, 29, 13}, {64, 48, 300}, {33, 101, 257}, {9, 8, 600}};
    for (const auto& sh : shapes) {
        const std::size_t m = sh[0], n = sh[1], kk = sh[2];
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(kk);
        const DenseMatrix at = testutil::gaussian(kk, m, m + 7 * n); // A^T storage for tn
        const DenseMatrix a = at.transposed();
        const DenseMatrix b = testutil::gaussian(kk, n, kk + 3);
        const DenseMatrix c0 = testutil::gaussian(m, n, 99);
        const DenseMatrix oracle = testutil::naive_mul(a, b);
        k::set_isa(k::Isa::scalar);
        DenseMatrix ref_tn = c0, ref_nn = c0;
        k::gemm_tn(m, n, kk, at.data(), m, b.data(), n, ref_tn.data(), n);
        k::gemm_nn(m, n, kk, a.data(), kk, b.data(), n, ref_nn.data(), n);
        CHECK(ref_tn == ref_nn);
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::fabs(ref_tn(i, j) - c0(i, j) - oracle(i, j)));
        CHECK(err < 1e-11);
        for (k::Isa isa : available()) {
            k::set_isa(isa);
            CAPTURE(k::isa_name(isa));
            DenseMatrix tn = c0, nn = c0;
            k::gemm_tn(m, n, kk, at.data(), m, b.data(), n, tn.data(), n);
            k::gemm_nn(m, n, kk, a.data(), kk, b.data(), n, nn.data(), n);
            CHECK(tn == ref_tn);
            CHECK(nn == ref_nn);
        }
    }
}

TEST_CASE("set_isa rejects unsupported variants") {
    for (k::Isa isa : {k::Isa::avx2, k::Isa::avx512})
        if (!k::isa_supported(isa)) CHECK_THROWS_AS(k::set_isa(isa), Error);
}
