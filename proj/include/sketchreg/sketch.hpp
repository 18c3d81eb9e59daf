#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/passio.hpp"
#include "sketchreg/random.hpp"

#include <cstddef>
#include <optional>
#include <string_view>

// Data-oblivious random embeddings Phi (s x m) for l2 and l1. Randomness is
// keyed by input row, so the result of applying an operator does not depend
// on block size, thread count or whether the input is streamed.
namespace sketchreg {

enum class SketchVariant {
    gaussian,
    rademacher,
    srdht,
    countsketch,
    cauchy,
    sparse_cauchy,
    reciprocal_exp,
    fast_cauchy,
};

std::string_view to_string(SketchVariant v) noexcept;
std::optional<SketchVariant> parse_variant(std::string_view s) noexcept;
/// True for the variants that embed in the l1 norm.
bool is_l1_variant(SketchVariant v) noexcept;

/// Output rows handled per generated tile of a dense sketch.
inline constexpr std::size_t kSketchChunk = 256;

struct SketchOperator {
    SketchVariant variant = SketchVariant::gaussian;
    std::size_t s = 1;
    std::size_t m = 1;
    SeedSpec seed{};
    double scale_c = 1.0; // Cauchy scale constant
    std::size_t t = 0;    // FastCauchy Hadamard block size (power of two)

    /// Validated operator. For FastCauchy a zero t selects max(16, next power of two >= s).
    static SketchOperator make(SketchVariant variant, std::size_t s, std::size_t m, SeedSpec seed,
                               double scale_c = 1.0, std::size_t t = 0);
};

/// Phi A (s x n). Throws DimensionMismatch when a.rows() != op.m.
DenseMatrix apply(const SketchOperator& op, const DenseMatrix& a);
/// Phi A over a stream in exactly one pass; bitwise equal to the in-memory result.
DenseMatrix apply(const SketchOperator& op, RowBlockStream& a, CostLedger* ledger = nullptr);
/// Phi as an explicit s x m matrix (Phi applied to the identity).
DenseMatrix materialize(const SketchOperator& op);

struct SparseEntry {
    std::size_t bucket = 0; // output row
    double weight = 0.0;
};
/// Column `row` of a countsketch, sparse_cauchy or reciprocal_exp operator.
SparseEntry sparse_entry(const SketchOperator& op, std::size_t row);

/// Default embedding dimension for accuracy eps and failure probability delta.
///   gaussian, rademacher: (sqrt(n) + sqrt(2 ln(2/delta)))^2 / eps^2
///   srdht:                14 n ln(40 m n) / eps^2, capped at m
///   countsketch:          (n^2 + n) / (eps^2 delta)
///   cauchy, sparse_cauchy, reciprocal_exp: c1 n ln n
///   fast_cauchy:          c1 n ln(n / delta)
std::size_t embedding_dim_default(SketchVariant variant, std::size_t n, double eps, double delta,
                                  std::size_t m = 0, double c1 = 4.0);

} // namespace sketchreg
