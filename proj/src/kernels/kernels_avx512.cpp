// AVX-512F kernels. Compiled with -mavx512f -mavx512dq -mfma; only reached
// after a runtime CPU check.

#include "sketchreg/kernels.hpp"

#include "gemm_impl.hpp"
#include "rng_common.hpp"

#include <cmath>
#include <limits>
#include <immintrin.h>

namespace sketchreg::kernels::detail {
namespace {

struct Avx512 {
    using V = __m512d;
    using Mask = __mmask8;
    static constexpr int kWidth = 8;

    static V load(const double* p) noexcept { return _mm512_loadu_pd(p); }
    static void store(double* p, V v) noexcept { _mm512_storeu_pd(p, v); }
    static V load_masked(const double* p, Mask m) noexcept { return _mm512_maskz_loadu_pd(m, p); }
    static void store_masked(double* p, V v, Mask m) noexcept { _mm512_mask_storeu_pd(p, m, v); }
    static V broadcast(double x) noexcept { return _mm512_set1_pd(x); }
    static V fmadd(V a, V b, V c) noexcept { return _mm512_fmadd_pd(a, b, c); }
    static Mask mask_for(std::size_t lanes) noexcept {
        return static_cast<Mask>(lanes >= 8 ? 0xFFu : ((1u << lanes) - 1u));
    }
};

// acc0 holds partial sums 0..7 and acc1 holds 8..15 of the 16-way reference order.
inline double reduce16(__m512d acc0, __m512d acc1) noexcept {
    acc0 = _mm512_add_pd(acc0, acc1);
    __m256d q = _mm256_add_pd(_mm512_castpd512_pd256(acc0), _mm512_extractf64x4_pd(acc0, 1));
    __m128d lo = _mm_add_pd(_mm256_castpd256_pd128(q), _mm256_extractf128_pd(q, 1));
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

double dot_avx512(const double* x, const double* y, std::size_t n) noexcept {
    __m512d acc0 = _mm512_setzero_pd(), acc1 = acc0;
    const std::size_t n16 = n - n % 16;
    for (std::size_t i = 0; i < n16; i += 16) {
        acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), acc0);
        acc1 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8), acc1);
    }
    double s = reduce16(acc0, acc1);
    for (std::size_t i = n16; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

double asum_avx512(const double* x, std::size_t n) noexcept {
    __m512d acc0 = _mm512_setzero_pd(), acc1 = acc0;
    const std::size_t n16 = n - n % 16;
    for (std::size_t i = 0; i < n16; i += 16) {
        acc0 = _mm512_add_pd(acc0, _mm512_abs_pd(_mm512_loadu_pd(x + i)));
        acc1 = _mm512_add_pd(acc1, _mm512_abs_pd(_mm512_loadu_pd(x + i + 8)));
    }
    double s = reduce16(acc0, acc1);
    for (std::size_t i = n16; i < n; ++i) s += std::fabs(x[i]);
    return s;
}

void axpy_avx512(double a, const double* x, double* y, std::size_t n) noexcept {
    const __m512d av = _mm512_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm512_storeu_pd(y + i, _mm512_fmadd_pd(av, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    if (i < n) {
        const __mmask8 m = Avx512::mask_for(n - i);
        _mm512_mask_storeu_pd(y + i, m,
                              _mm512_fmadd_pd(av, _mm512_maskz_loadu_pd(m, x + i), _mm512_maskz_loadu_pd(m, y + i)));
    }
}

void scal_avx512(double a, double* x, std::size_t n) noexcept {
    const __m512d av = _mm512_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm512_storeu_pd(x + i, _mm512_mul_pd(av, _mm512_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void rot_avx512(double* x, double* y, std::size_t n, double c, double s) noexcept {
    const __m512d cv = _mm512_set1_pd(c);
    const __m512d sv = _mm512_set1_pd(s);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m512d xv = _mm512_loadu_pd(x + i);
        const __m512d yv = _mm512_loadu_pd(y + i);
        _mm512_storeu_pd(x + i, _mm512_sub_pd(_mm512_mul_pd(cv, xv), _mm512_mul_pd(sv, yv)));
        _mm512_storeu_pd(y + i, _mm512_add_pd(_mm512_mul_pd(sv, xv), _mm512_mul_pd(cv, yv)));
    }
    for (; i < n; ++i) {
        const double xi = x[i];
        const double yi = y[i];
        x[i] = c * xi - s * yi;
        y[i] = s * xi + c * yi;
    }
}

void gemm_tn_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    gemm::gemm_generic<Avx512, 8, 3>(m, n, k, a, 1, lda, b, ldb, c, ldc);
}

void gemm_nn_avx512(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept {
    gemm::gemm_generic<Avx512, 8, 3>(m, n, k, a, lda, 1, b, ldb, c, ldc);
}

inline __m512i mix64_avx512(__m512i z) noexcept {
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 30)), _mm512_set1_epi64(0xbf58476d1ce4e5b9LL));
    z = _mm512_mullo_epi64(_mm512_xor_si512(z, _mm512_srli_epi64(z, 27)), _mm512_set1_epi64(0x94d049bb133111ebLL));
    return _mm512_xor_si512(z, _mm512_srli_epi64(z, 31));
}

void normal_fast_avx512(std::uint64_t state, double* out, std::size_t n, const double* zx,
                        const double* zr) noexcept {
    const __m512i lane = _mm512_set_epi64(8, 7, 6, 5, 4, 3, 2, 1);
    const __m512i golden = _mm512_set1_epi64(static_cast<long long>(kGolden));
    const __m512i step = _mm512_set1_epi64(static_cast<long long>(8 * kGolden));
    __m512i ctr = _mm512_add_epi64(_mm512_set1_epi64(static_cast<long long>(state)), _mm512_mullo_epi64(lane, golden));
    const __m512d half = _mm512_set1_pd(0.5);
    const __m512d scale = _mm512_set1_pd(0x1.0p-52);
    const __m512d two = _mm512_set1_pd(2.0);
    const __m512d one = _mm512_set1_pd(1.0);
    const __m512d nan = _mm512_set1_pd(std::numeric_limits<double>::quiet_NaN());
    const __m512i layer_mask = _mm512_set1_epi64(kLayerMask);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m512i bits = mix64_avx512(ctr);
        ctr = _mm512_add_epi64(ctr, step);
        __m512d u = _mm512_mul_pd(_mm512_add_pd(_mm512_cvtepi64_pd(_mm512_srli_epi64(bits, 12)), half), scale);
        u = _mm512_sub_pd(_mm512_mul_pd(two, u), one);
        const __m512i layer = _mm512_and_si512(bits, layer_mask);
        const __m512d r = _mm512_i64gather_pd(layer, zr, 8);
        const __m512d x = _mm512_i64gather_pd(layer, zx, 8);
        const __mmask8 ok = _mm512_cmp_pd_mask(_mm512_abs_pd(u), r, _CMP_LT_OQ);
        _mm512_storeu_pd(out + i, _mm512_mask_blend_pd(ok, nan, _mm512_mul_pd(u, x)));
    }
    for (; i < n; ++i) {
        const std::uint64_t bits = mix64(state + (i + 1) * kGolden);
        const double u = 2.0 * unit52(bits) - 1.0;
        const std::size_t layer = bits & kLayerMask;
        out[i] = std::fabs(u) < zr[layer] ? u * zx[layer] : std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

const KernelTable* avx512_table() noexcept {
    static const KernelTable table{dot_avx512, asum_avx512,    axpy_avx512,   scal_avx512,
                                   rot_avx512, gemm_tn_avx512, gemm_nn_avx512, normal_fast_avx512};
    return &table;
}

} // namespace sketchreg::kernels::detail
