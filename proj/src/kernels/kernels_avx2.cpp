// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after a
// runtime CPU check.

#include "sketchreg/kernels.hpp"

#include "gemm_impl.hpp"
#include "rng_common.hpp"

#include <cmath>
#include <limits>
#include <immintrin.h>

namespace sketchreg::kernels::detail {
namespace {

struct Avx2 {
    using V = __m256d;
    using Mask = __m256i;
    static constexpr int kWidth = 4;

    static V load(const double* p) noexcept { return _mm256_loadu_pd(p); }
    static void store(double* p, V v) noexcept { _mm256_storeu_pd(p, v); }
    static V load_masked(const double* p, Mask m) noexcept { return _mm256_maskload_pd(p, m); }
    static void store_masked(double* p, V v, Mask m) noexcept { _mm256_maskstore_pd(p, m, v); }
    static V broadcast(double x) noexcept { return _mm256_set1_pd(x); }
    static V fmadd(V a, V b, V c) noexcept { return _mm256_fmadd_pd(a, b, c); }
    static Mask mask_for(std::size_t lanes) noexcept {
        const long long on = -1;
        return _mm256_set_epi64x(lanes > 3 ? on : 0, lanes > 2 ? on : 0, lanes > 1 ? on : 0,
                                 lanes > 0 ? on : 0);
    }
};

// Lanes of acc[r] hold partial sums 4r .. 4r+3 of the 16-way reference order.
inline double reduce16(__m256d acc0, __m256d acc1, __m256d acc2, __m256d acc3) noexcept {
    acc0 = _mm256_add_pd(acc0, acc2); // p[l] += p[l + 8], l < 4
    acc1 = _mm256_add_pd(acc1, acc3); // p[l] += p[l + 8], 4 <= l < 8
    acc0 = _mm256_add_pd(acc0, acc1); // p[l] += p[l + 4]
    __m128d lo = _mm256_castpd256_pd128(acc0);
    const __m128d hi = _mm256_extractf128_pd(acc0, 1);
    lo = _mm_add_pd(lo, hi); // p[l] += p[l + 2]
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

double dot_avx2(const double* x, const double* y, std::size_t n) noexcept {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
    const std::size_t n16 = n - n % 16;
    for (std::size_t i = 0; i < n16; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
    }
    double s = reduce16(acc0, acc1, acc2, acc3);
    for (std::size_t i = n16; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

double asum_avx2(const double* x, std::size_t n) noexcept {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
    const std::size_t n16 = n - n % 16;
    for (std::size_t i = 0; i < n16; i += 16) {
        acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)));
        acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i + 4)));
        acc2 = _mm256_add_pd(acc2, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i + 8)));
        acc3 = _mm256_add_pd(acc3, _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i + 12)));
    }
    double s = reduce16(acc0, acc1, acc2, acc3);
    for (std::size_t i = n16; i < n; ++i) s += std::fabs(x[i]);
    return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) noexcept {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void scal_avx2(double a, double* x, std::size_t n) noexcept {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void rot_avx2(double* x, double* y, std::size_t n, double c, double s) noexcept {
    const __m256d cv = _mm256_set1_pd(c);
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(x + i, _mm256_sub_pd(_mm256_mul_pd(cv, xv), _mm256_mul_pd(sv, yv)));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_mul_pd(sv, xv), _mm256_mul_pd(cv, yv)));
    }
    for (; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    gemm::gemm_generic<Avx2, 6, 2>(m, n, k, a, 1, lda, b, ldb, c, ldc);
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    gemm::gemm_generic<Avx2, 6, 2>(m, n, k, a, lda, 1, b, ldb, c, ldc);
}

// Low 64 bits of a * b per lane, from 32-bit partial products.
inline __m256i mullo64_avx2(__m256i a, __m256i b) noexcept {
    const __m256i lo = _mm256_mul_epu32(a, b);
    const __m256i cross = _mm256_add_epi64(_mm256_mul_epu32(_mm256_srli_epi64(a, 32), b),
                                           _mm256_mul_epu32(a, _mm256_srli_epi64(b, 32)));
    return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i mix64_avx2(__m256i z) noexcept {
    z = mullo64_avx2(_mm256_xor_si256(z, _mm256_srli_epi64(z, 30)), _mm256_set1_epi64x(0xbf58476d1ce4e5b9LL));
    z = mullo64_avx2(_mm256_xor_si256(z, _mm256_srli_epi64(z, 27)), _mm256_set1_epi64x(0x94d049bb133111ebLL));
    return _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
}

void normal_fast_avx2(std::uint64_t state, double* out, std::size_t n, const double* zx,
                      const double* zr) noexcept {
    const __m256i golden = _mm256_set1_epi64x(static_cast<long long>(kGolden));
    const __m256i step = _mm256_set1_epi64x(static_cast<long long>(4 * kGolden));
    __m256i ctr = _mm256_add_epi64(_mm256_set1_epi64x(static_cast<long long>(state)),
                                   mullo64_avx2(_mm256_set_epi64x(4, 3, 2, 1), golden));
    // Values below 2^52 convert exactly by planting them in the mantissa of 2^52.
    const __m256i magic_bits = _mm256_set1_epi64x(0x4330000000000000LL);
    const __m256d magic = _mm256_set1_pd(0x1.0p52);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d scale = _mm256_set1_pd(0x1.0p-52);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign = _mm256_set1_pd(-0.0);
    const __m256d nan = _mm256_set1_pd(std::numeric_limits<double>::quiet_NaN());
    const __m256i layer_mask = _mm256_set1_epi64x(kLayerMask);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i bits = mix64_avx2(ctr);
        ctr = _mm256_add_epi64(ctr, step);
        const __m256d v = _mm256_sub_pd(
            _mm256_castsi256_pd(_mm256_or_si256(_mm256_srli_epi64(bits, 12), magic_bits)), magic);
        __m256d u = _mm256_mul_pd(_mm256_add_pd(v, half), scale);
        u = _mm256_sub_pd(_mm256_mul_pd(two, u), one);
        const __m256i layer = _mm256_and_si256(bits, layer_mask);
        const __m256d r = _mm256_i64gather_pd(zr, layer, 8);
        const __m256d x = _mm256_i64gather_pd(zx, layer, 8);
        const __m256d ok = _mm256_cmp_pd(_mm256_andnot_pd(sign, u), r, _CMP_LT_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(nan, _mm256_mul_pd(u, x), ok));
    }
    for (; i < n; ++i) {
        const std::uint64_t bits = mix64(state + (i + 1) * kGolden);
        const double u = 2.0 * unit52(bits) - 1.0;
        const std::size_t layer = bits & kLayerMask;
        out[i] = std::fabs(u) < zr[layer] ? u * zx[layer] : std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

const KernelTable* avx2_table() noexcept {
    static const KernelTable table{dot_avx2, asum_avx2,    axpy_avx2,   scal_avx2,
                                   rot_avx2, gemm_tn_avx2, gemm_nn_avx2, normal_fast_avx2};
    return &table;
}

} // namespace sketchreg::kernels::detail
