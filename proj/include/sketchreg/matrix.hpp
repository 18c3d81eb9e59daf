#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sketchreg {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix column(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }

    /// Copy of column j.
    Vector col(std::size_t j) const;
    DenseMatrix transposed() const;
    /// Rows [begin, begin + count).
    DenseMatrix row_slice(std::size_t begin, std::size_t count) const;
    /// Columns [begin, begin + count).
    DenseMatrix col_slice(std::size_t begin, std::size_t count) const;
    bool all_finite() const noexcept;

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// A * B.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
/// A^T * B.
DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b);
/// A * x.
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// A^T * u.
Vector matvec_t(const DenseMatrix& a, std::span<const double> u);
/// [A c] with c appended as the last column.
DenseMatrix hstack(const DenseMatrix& a, std::span<const double> c);
/// Vertical concatenation.
DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom);

double norm2(std::span<const double> x);
double norm1(std::span<const double> x);
double norm_inf(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double frobenius(const DenseMatrix& a);
/// max |a_ij - b_ij|.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

Vector subtract(std::span<const double> x, std::span<const double> y);
/// ||x - y||_2 / ||y||_2.
double relative_error(std::span<const double> x, std::span<const double> y);

} // namespace sketchreg
