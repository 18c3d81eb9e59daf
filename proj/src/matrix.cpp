#include "sketchreg/matrix.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"
#include "sketchreg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sketchreg {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, ErrorCode::DimensionMismatch,
            "data length " + std::to_string(data_.size()) + " != " + std::to_string(rows) + "x" +
                std::to_string(cols));
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require(r.size() == cols_, ErrorCode::DimensionMismatch, "ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> v) {
    return DenseMatrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Vector DenseMatrix::col(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    constexpr std::size_t kTile = 32;
    for (std::size_t i0 = 0; i0 < rows_; i0 += kTile)
        for (std::size_t j0 = 0; j0 < cols_; j0 += kTile)
            for (std::size_t i = i0; i < std::min(rows_, i0 + kTile); ++i)
                for (std::size_t j = j0; j < std::min(cols_, j0 + kTile); ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix DenseMatrix::row_slice(std::size_t begin, std::size_t count) const {
    require(begin + count <= rows_, ErrorCode::DimensionMismatch, "row slice out of range");
    return DenseMatrix(count, cols_,
                       std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                           data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols_)));
}

DenseMatrix DenseMatrix::col_slice(std::size_t begin, std::size_t count) const {
    require(begin + count <= cols_, ErrorCode::DimensionMismatch, "column slice out of range");
    DenseMatrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i)
        std::copy_n(data_.data() + i * cols_ + begin, count, out.data() + i * count);
    return out;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.cols() == b.rows(), ErrorCode::DimensionMismatch, "multiply: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    parallel::for_each_range(a.rows(), 256, [&](std::size_t r0, std::size_t r1) {
        kernels::gemm_nn(r1 - r0, b.cols(), a.cols(), a.data() + r0 * a.cols(), a.cols(), b.data(),
                         b.cols(), c.data() + r0 * c.cols(), c.cols());
    });
    return c;
}

DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows(), ErrorCode::DimensionMismatch, "multiply_tn: row counts differ");
    DenseMatrix c(a.cols(), b.cols());
    parallel::for_each_range(a.cols(), 64, [&](std::size_t r0, std::size_t r1) {
        kernels::gemm_tn(r1 - r0, b.cols(), a.rows(), a.data() + r0, a.cols(), b.data(), b.cols(),
                         c.data() + r0 * c.cols(), c.cols());
    });
    return c;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), ErrorCode::DimensionMismatch, "apply: size mismatch");
    Vector y(a.rows());
    parallel::for_each_range(a.rows(), 4096, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) y[i] = kernels::dot(a.row(i).data(), x.data(), x.size());
    });
    return y;
}

Vector matvec_t(const DenseMatrix& a, std::span<const double> u) {
    require(a.rows() == u.size(), ErrorCode::DimensionMismatch, "apply_t: size mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) kernels::axpy(u[i], a.row(i).data(), y.data(), a.cols());
    return y;
}

DenseMatrix hstack(const DenseMatrix& a, std::span<const double> c) {
    require(a.rows() == c.size(), ErrorCode::DimensionMismatch, "hstack: size mismatch");
    DenseMatrix out(a.rows(), a.cols() + 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy_n(a.row(i).data(), a.cols(), out.row(i).data());
        out(i, a.cols()) = c[i];
    }
    return out;
}

DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom) {
    require(top.cols() == bottom.cols(), ErrorCode::DimensionMismatch, "vstack: column counts differ");
    std::vector<double> data;
    data.reserve(top.size() + bottom.size());
    data.insert(data.end(), top.values().begin(), top.values().end());
    data.insert(data.end(), bottom.values().begin(), bottom.values().end());
    return DenseMatrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

double norm2(std::span<const double> x) {
    // Scaled accumulation keeps huge and tiny entries from overflowing.
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    if (scale > 1e-100 && scale < 1e100) return std::sqrt(kernels::dot(x.data(), x.data(), x.size()));
    double s = 0.0;
    for (double v : x) s += (v / scale) * (v / scale);
    return scale * std::sqrt(s);
}

double norm1(std::span<const double> x) { return kernels::asum(x.data(), x.size()); }

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::fabs(v));
    return m;
}

double dot(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorCode::DimensionMismatch, "dot: size mismatch");
    return kernels::dot(x.data(), y.data(), x.size());
}

double frobenius(const DenseMatrix& a) { return norm2(a.values()); }

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::DimensionMismatch,
            "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

Vector subtract(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorCode::DimensionMismatch, "subtract: size mismatch");
    Vector d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    return d;
}

double relative_error(std::span<const double> x, std::span<const double> y) {
    return norm2(subtract(x, y)) / norm2(y);
}

} // namespace sketchreg
