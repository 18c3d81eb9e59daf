#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

// Inner-loop kernels with a scalar reference implementation and AVX2 / AVX-512
// variants selected at runtime. Every variant uses the same association order
// (fused multiply-add per element, 16 interleaved partial sums for reductions),
// so all variants produce bitwise-identical results.
namespace sketchreg::kernels {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;
bool isa_supported(Isa isa) noexcept;
/// Highest ISA supported by this CPU, capped by SKETCHREG_SIMD if set.
Isa detected_isa() noexcept;
Isa active_isa() noexcept;
/// Force a variant. Throws InvalidArgument if the CPU lacks it.
void set_isa(Isa isa);

double dot(const double* x, const double* y, std::size_t n) noexcept;
/// Sum of |x_i|.
double asum(const double* x, std::size_t n) noexcept;
/// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n) noexcept;
/// x *= a
void scal(double a, double* x, std::size_t n) noexcept;
/// (x, y) <- (c x - s y, s x + c y)
void rot(double* x, double* y, std::size_t n, double c, double s) noexcept;

/// C (m x n) += A^T B where A is k x m (row stride lda) and B is k x n.
/// Each C entry accumulates over k in increasing order.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept;
/// C (m x n) += A B where A is m x k and B is k x n.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) noexcept;

/// Ziggurat fast path for standard normals. Output i uses the single 64-bit
/// word mix64(state + (i + 1) * golden); its top 52 bits give u in (-1, 1) and
/// its low 8 bits the layer. Draws outside the fast region are written as NaN
/// for the caller to resolve. `zx` has 257 layer edges, `zr` 256 edge ratios.
void normal_fast(std::uint64_t state, double* out, std::size_t n, const double* zx, const double* zr) noexcept;

namespace detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t) noexcept;
    double (*asum)(const double*, std::size_t) noexcept;
    void (*axpy)(double, const double*, double*, std::size_t) noexcept;
    void (*scal)(double, double*, std::size_t) noexcept;
    void (*rot)(double*, double*, std::size_t, double, double) noexcept;
    void (*gemm_tn)(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
                    std::size_t, double*, std::size_t) noexcept;
    void (*gemm_nn)(std::size_t, std::size_t, std::size_t, const double*, std::size_t, const double*,
                    std::size_t, double*, std::size_t) noexcept;
    void (*normal_fast)(std::uint64_t, double*, std::size_t, const double*, const double*) noexcept;
};

const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;   // nullptr when not compiled in
const KernelTable* avx512_table() noexcept; // nullptr when not compiled in

} // namespace detail
} // namespace sketchreg::kernels
