// Scalar reference kernels. The association order here defines the result that
// every SIMD variant must reproduce bit for bit.

#include "sketchreg/kernels.hpp"

#include "rng_common.hpp"

#include <cmath>
#include <limits>

namespace sketchreg::kernels::detail {
namespace {

constexpr std::size_t kLanes = 16;

inline double tree_reduce(double (&p)[kLanes]) noexcept {
    for (std::size_t l = 0; l < 8; ++l) p[l] += p[l + 8];
    for (std::size_t l = 0; l < 4; ++l) p[l] += p[l + 4];
    for (std::size_t l = 0; l < 2; ++l) p[l] += p[l + 2];
    return p[0] + p[1];
}

double dot_scalar(const double* x, const double* y, std::size_t n) noexcept {
    double p[kLanes] = {};
    const std::size_t n16 = n - n % kLanes;
    for (std::size_t i = 0; i < n16; i += kLanes)
        for (std::size_t l = 0; l < kLanes; ++l) p[l] = std::fma(x[i + l], y[i + l], p[l]);
    double s = tree_reduce(p);
    for (std::size_t i = n16; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

double asum_scalar(const double* x, std::size_t n) noexcept {
    double p[kLanes] = {};
    const std::size_t n16 = n - n % kLanes;
    for (std::size_t i = 0; i < n16; i += kLanes)
        for (std::size_t l = 0; l < kLanes; ++l) p[l] += std::fabs(x[i + l]);
    double s = tree_reduce(p);
    for (std::size_t i = n16; i < n; ++i) s += std::fabs(x[i]);
    return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void scal_scalar(double a, double* x, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void rot_scalar(double* x, double* y, std::size_t n, double c, double s) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (std::size_t i = 0; i < m; ++i) {
            const double aip = arow[i];
            double* crow = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
        }
    }
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb;
        for (std::size_t i = 0; i < m; ++i) {
            const double aip = a[i * lda + p];
            double* crow = c + i * ldc;
            for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(aip, brow[j], crow[j]);
        }
    }
}

void normal_fast_scalar(std::uint64_t state, double* out, std::size_t n, const double* zx,
                        const double* zr) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = mix64(state + (i + 1) * kGolden);
        const double u = 2.0 * unit52(bits) - 1.0;
        const std::size_t layer = bits & kLayerMask;
        out[i] = std::fabs(u) < zr[layer] ? u * zx[layer] : std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

const KernelTable& scalar_table() noexcept {
    static const KernelTable table{dot_scalar,  asum_scalar,    axpy_scalar,   scal_scalar,
                                   rot_scalar,  gemm_tn_scalar, gemm_nn_scalar, normal_fast_scalar};
    return table;
}

} // namespace sketchreg::kernels::detail
