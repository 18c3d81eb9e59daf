#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/parallel.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

// Row-block streaming over matrices in memory or on disk, with pass and
// reduction accounting that stands in for distributed I/O and all-reduce cost.
namespace sketchreg {

inline constexpr std::size_t kDefaultBlockRows = 8192;

struct CostLedger {
    std::uint64_t passes = 0;
    std::uint64_t reductions = 0;
    double flops_estimate = 0.0;

    void add_pass(double flops = 0.0) noexcept {
        ++passes;
        flops_estimate += flops;
    }
    bool operator==(const CostLedger&) const = default;
};

/// Records one cluster-wide synchronization (global dot product or norm).
CostLedger& record_reduction(CostLedger& ledger) noexcept;

// ---- RNLA binary format: "RNLA", u32 version = 1, u64 rows, u64 cols, then
// rows * cols little-endian f64 values in row-major order.

struct MatrixHeader {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
};

inline constexpr std::uint32_t kRnlaVersion = 1;
inline constexpr std::size_t kRnlaHeaderBytes = 24;

void write_matrix(const std::string& path, const DenseMatrix& a);
DenseMatrix read_matrix(const std::string& path);
MatrixHeader read_header(const std::string& path);
/// Reads an n x 1 or 1 x n file as a vector.
Vector read_vector(const std::string& path);
void write_vector(const std::string& path, std::span<const double> v);

/// Appends rows to an RNLA file; the header row count is fixed up on close.
class RnlaWriter {
public:
    RnlaWriter(const std::string& path, std::size_t cols);
    ~RnlaWriter();
    RnlaWriter(const RnlaWriter&) = delete;
    RnlaWriter& operator=(const RnlaWriter&) = delete;

    void append(const double* rows, std::size_t count);
    void append(const DenseMatrix& block) { append(block.data(), block.rows()); }
    void close();
    std::size_t rows_written() const noexcept { return rows_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t cols_;
    std::size_t rows_ = 0;
    bool closed_ = false;
};

void write_csv(const std::string& path, const DenseMatrix& a);
DenseMatrix read_csv(const std::string& path);

// ---- Streaming

/// A view of rows [row0, row0 + rows) of the source.
struct RowBlock {
    std::size_t index = 0;
    std::size_t row0 = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    const double* data = nullptr;

    std::span<const double> row(std::size_t i) const noexcept { return {data + i * cols, cols}; }
};

class RowBlockStream {
public:
    /// Streams an in-memory matrix; the matrix must outlive the stream.
    static RowBlockStream from_matrix(const DenseMatrix& a, std::size_t block_rows = kDefaultBlockRows);
    /// Streams an RNLA file.
    static RowBlockStream from_file(const std::string& path, std::size_t block_rows = kDefaultBlockRows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t block_rows() const noexcept { return block_rows_; }
    std::size_t block_count() const noexcept { return (rows_ + block_rows_ - 1) / block_rows_; }
    bool in_memory() const noexcept { return matrix_ != nullptr; }
    /// Row index of the next block to be yielded.
    std::size_t cursor() const noexcept { return cursor_; }

    void reset() noexcept { cursor_ = 0; }
    /// Yields the next block into `out`. `buffer` receives the rows for file
    /// sources and is unused for in-memory sources. Returns false at the end.
    bool next(RowBlock& out, std::vector<double>& buffer);

    /// Visits every block in order, one pass. Blocks may be processed
    /// concurrently when `parallel` is set; `fn` must then only write
    /// block-disjoint outputs.
    void for_each_block(CostLedger* ledger, const std::function<void(const RowBlock&)>& fn,
                        bool parallel = true);

    /// Reads the full source into memory.
    DenseMatrix materialize();

private:
    RowBlockStream() = default;

    const DenseMatrix* matrix_ = nullptr;
    std::shared_ptr<std::ifstream> file_;
    std::string path_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t block_rows_ = kDefaultBlockRows;
    std::size_t cursor_ = 0;
};

/// Combines per-block accumulators with a fixed binary tree over block index:
/// level by level, element 2i merges with element 2i + 1.
template <class Acc, class Combine>
Acc tree_merge(std::vector<Acc> parts, Combine combine) {
    if (parts.empty()) return Acc{};
    while (parts.size() > 1) {
        std::vector<Acc> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(combine(std::move(parts[i]), std::move(parts[i + 1])));
        if (parts.size() % 2) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

/// One pass: f maps each block to an accumulator, merged by tree_merge.
template <class Acc, class F, class Combine>
Acc map_blocks(RowBlockStream& stream, CostLedger* ledger, F f, Combine combine) {
    std::vector<Acc> parts(stream.block_count());
    stream.for_each_block(ledger, [&](const RowBlock& blk) { parts[blk.index] = f(blk); });
    return tree_merge(std::move(parts), combine);
}

/// y = A x over the stream (one pass).
Vector stream_matvec(RowBlockStream& stream, std::span<const double> x, CostLedger* ledger);
/// A^T u over the stream (one pass, tree-merged partial sums).
Vector stream_matvec_t(RowBlockStream& stream, std::span<const double> u, CostLedger* ledger);

} // namespace sketchreg
