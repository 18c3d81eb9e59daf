// Register-blocked GEMM shared by the SIMD variants. Included by exactly one
// translation unit per instruction set; `Simd` supplies the vector primitives.
//
// Every C entry is updated as c = fma(a_p, b_p, c) for p = 0, 1, ..., k-1, the
// same order as the scalar reference, so results are bitwise identical.
#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace sketchreg::kernels::detail::gemm {

constexpr std::size_t kBlockK = 128;

template <class Simd, int MR, int NV, bool Tail>
inline void micro_kernel(std::size_t kc, const double* a, std::size_t ars, std::size_t aks,
                         const double* b, std::size_t ldb, double* c, std::size_t ldc,
                         typename Simd::Mask tail_mask) noexcept {
    using V = typename Simd::V;
    constexpr int W = Simd::kWidth;
    V acc[MR][NV];
    _Pragma("GCC unroll 16") for (int r = 0; r < MR; ++r)
        _Pragma("GCC unroll 16") for (int v = 0; v < NV; ++v) {
            const double* cp = c + r * ldc + v * W;
            acc[r][v] = (Tail && v == NV - 1) ? Simd::load_masked(cp, tail_mask) : Simd::load(cp);
        }
    for (std::size_t p = 0; p < kc; ++p) {
        const double* bp = b + p * ldb;
        V bv[NV];
        _Pragma("GCC unroll 16") for (int v = 0; v < NV; ++v)
            bv[v] = (Tail && v == NV - 1) ? Simd::load_masked(bp + v * W, tail_mask) : Simd::load(bp + v * W);
        const double* ap = a + p * aks;
        _Pragma("GCC unroll 16") for (int r = 0; r < MR; ++r) {
            const V av = Simd::broadcast(ap[r * ars]);
            _Pragma("GCC unroll 16") for (int v = 0; v < NV; ++v) acc[r][v] = Simd::fmadd(av, bv[v], acc[r][v]);
        }
    }
    _Pragma("GCC unroll 16") for (int r = 0; r < MR; ++r)
        _Pragma("GCC unroll 16") for (int v = 0; v < NV; ++v) {
            double* cp = c + r * ldc + v * W;
            if (Tail && v == NV - 1)
                Simd::store_masked(cp, acc[r][v], tail_mask);
            else
                Simd::store(cp, acc[r][v]);
        }
}

// Rows of one column panel: blocks of MR rows, then single rows.
template <class Simd, int MR, int NV, bool Tail>
inline void panel(std::size_t m, std::size_t kc, const double* a, std::size_t ars, std::size_t aks,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc,
                  typename Simd::Mask tail_mask) noexcept {
    std::size_t i = 0;
    for (; i + MR <= m; i += MR)
        micro_kernel<Simd, MR, NV, Tail>(kc, a + i * ars, ars, aks, b, ldb, c + i * ldc, ldc, tail_mask);
    for (; i < m; ++i)
        micro_kernel<Simd, 1, NV, Tail>(kc, a + i * ars, ars, aks, b, ldb, c + i * ldc, ldc, tail_mask);
}

// Scratch for packed operands, reused across calls on the same thread.
inline double* scratch(std::vector<double>& buf, std::size_t n) {
    if (buf.size() < n) buf.resize(n);
    return buf.data();
}

template <class Simd, int MR, int NV>
void gemm_generic(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t ars,
                  std::size_t aks, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) noexcept {
    constexpr std::size_t W = Simd::kWidth;
    constexpr std::size_t NR = W * NV;
    const typename Simd::Mask full = Simd::mask_for(W);
    thread_local std::vector<double> a_buf;
    thread_local std::vector<double> b_buf;
    const std::size_t m_full = m - m % MR;
    const std::size_t kc_max = std::min(kBlockK, k);
    double* ap = scratch(a_buf, m_full * kc_max);
    double* bp = scratch(b_buf, kc_max * NR);
    for (std::size_t kb = 0; kb < k; kb += kBlockK) {
        const std::size_t kc = std::min(kBlockK, k - kb);
        const double* ak = a + kb * aks;
        const double* bk = b + kb * ldb;
        // Packed A: for each block of MR rows, kc consecutive groups of MR values.
        for (std::size_t i = 0; i < m_full; i += MR) {
            double* dst = ap + i * kc;
            for (std::size_t p = 0; p < kc; ++p)
                for (int r = 0; r < MR; ++r) dst[p * MR + r] = ak[(i + r) * ars + p * aks];
        }
        std::size_t j = 0;
        for (; j + NR <= n; j += NR) {
            for (std::size_t p = 0; p < kc; ++p) std::copy_n(bk + p * ldb + j, NR, bp + p * NR);
            for (std::size_t i = 0; i < m_full; i += MR)
                micro_kernel<Simd, MR, NV, false>(kc, ap + i * kc, 1, MR, bp, NR, c + i * ldc + j, ldc, full);
            for (std::size_t i = m_full; i < m; ++i)
                micro_kernel<Simd, 1, NV, false>(kc, ak + i * ars, ars, aks, bp, NR, c + i * ldc + j, ldc, full);
        }
        for (; j + W <= n; j += W)
            panel<Simd, MR, 1, false>(m, kc, ak, ars, aks, bk + j, ldb, c + j, ldc, full);
        if (j < n)
            panel<Simd, MR, 1, true>(m, kc, ak, ars, aks, bk + j, ldb, c + j, ldc, Simd::mask_for(n - j));
    }
}

} // namespace sketchreg::kernels::detail::gemm
