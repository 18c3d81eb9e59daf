#include "sketchreg/passio.hpp"

#include "sketchreg/error.hpp"
#include "sketchreg/kernels.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace sketchreg {
namespace {

constexpr char kMagic[4] = {'R', 'N', 'L', 'A'};

template <class T>
T to_little(T v) noexcept {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

void swap_doubles(double* p, std::size_t n) noexcept {
    if constexpr (std::endian::native == std::endian::big)
        for (std::size_t i = 0; i < n; ++i) p[i] = to_little(p[i]);
    else
        (void)p, (void)n;
}

void write_header(std::ostream& out, std::uint64_t rows, std::uint64_t cols) {
    const std::uint32_t version = to_little(kRnlaVersion);
    const std::uint64_t r = to_little(rows);
    const std::uint64_t c = to_little(cols);
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&r), 8);
    out.write(reinterpret_cast<const char*>(&c), 8);
}

MatrixHeader parse_header(std::istream& in, const std::string& path) {
    char magic[4];
    std::uint32_t version = 0;
    MatrixHeader h;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&h.rows), 8);
    in.read(reinterpret_cast<char*>(&h.cols), 8);
    if (!in) fail(ErrorCode::Format, path + ": truncated header");
    if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::Format, path + ": bad magic");
    version = to_little(version);
    if (version != kRnlaVersion) fail(ErrorCode::Format, path + ": unsupported version " + std::to_string(version));
    h.rows = to_little(h.rows);
    h.cols = to_little(h.cols);
    return h;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    return in;
}

void write_values(std::ostream& out, const double* p, std::size_t n) {
    if constexpr (std::endian::native == std::endian::big) {
        std::vector<double> tmp(p, p + n);
        swap_doubles(tmp.data(), n);
        out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    }
}

} // namespace

CostLedger& record_reduction(CostLedger& ledger) noexcept {
    ++ledger.reductions;
    return ledger;
}

void write_matrix(const std::string& path, const DenseMatrix& a) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot create " + path);
    write_header(out, a.rows(), a.cols());
    write_values(out, a.data(), a.size());
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

MatrixHeader read_header(const std::string& path) {
    std::ifstream in = open_in(path);
    return parse_header(in, path);
}

DenseMatrix read_matrix(const std::string& path) {
    std::ifstream in = open_in(path);
    const MatrixHeader h = parse_header(in, path);
    DenseMatrix a(h.rows, h.cols);
    in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) fail(ErrorCode::Format, path + ": truncated data");
    swap_doubles(a.data(), a.size());
    require(a.all_finite(), ErrorCode::Format, path + ": non-finite entries");
    return a;
}

Vector read_vector(const std::string& path) {
    DenseMatrix a = read_matrix(path);
    require(a.rows() == 1 || a.cols() == 1, ErrorCode::Format, path + ": not a vector");
    return std::move(a.storage());
}

void write_vector(const std::string& path, std::span<const double> v) { write_matrix(path, DenseMatrix::column(v)); }

RnlaWriter::RnlaWriter(const std::string& path, std::size_t cols)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), cols_(cols) {
    if (!out_) fail(ErrorCode::Io, "cannot create " + path);
    write_header(out_, 0, cols);
}

RnlaWriter::~RnlaWriter() {
    try {
        close();
    } catch (...) {
    }
}

void RnlaWriter::append(const double* rows, std::size_t count) {
    require(!closed_, ErrorCode::Io, "append after close: " + path_);
    write_values(out_, rows, count * cols_);
    rows_ += count;
}

void RnlaWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.seekp(0);
    write_header(out_, rows_, cols_);
    out_.close();
    if (!out_) fail(ErrorCode::Io, "write failed: " + path_);
}

void write_csv(const std::string& path, const DenseMatrix& a) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot create " + path);
    char buf[32];
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const auto res = std::to_chars(buf, buf + sizeof buf, a(i, j));
            if (j) out.put(',');
            out.write(buf, res.ptr - buf);
        }
        out.put('\n');
    }
    if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

DenseMatrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path);
    std::vector<double> data;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t count = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) fail(ErrorCode::Format, path + ": bad number on line " + std::to_string(rows + 1));
            data.push_back(v);
            ++count;
            p = res.ptr;
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            if (*p != ',') fail(ErrorCode::Format, path + ": expected ',' on line " + std::to_string(rows + 1));
            ++p;
        }
        if (rows == 0) cols = count;
        if (count != cols) fail(ErrorCode::Format, path + ": ragged row " + std::to_string(rows + 1));
        ++rows;
    }
    DenseMatrix a(rows, cols, std::move(data));
    require(a.all_finite(), ErrorCode::Format, path + ": non-finite entries");
    return a;
}

RowBlockStream RowBlockStream::from_matrix(const DenseMatrix& a, std::size_t block_rows) {
    require(block_rows >= 1, ErrorCode::InvalidArgument, "block_rows must be positive");
    RowBlockStream s;
    s.matrix_ = &a;
    s.rows_ = a.rows();
    s.cols_ = a.cols();
    s.block_rows_ = block_rows;
    return s;
}

RowBlockStream RowBlockStream::from_file(const std::string& path, std::size_t block_rows) {
    require(block_rows >= 1, ErrorCode::InvalidArgument, "block_rows must be positive");
    RowBlockStream s;
    s.file_ = std::make_shared<std::ifstream>(open_in(path));
    const MatrixHeader h = parse_header(*s.file_, path);
    s.path_ = path;
    s.rows_ = h.rows;
    s.cols_ = h.cols;
    s.block_rows_ = block_rows;
    return s;
}

bool RowBlockStream::next(RowBlock& out, std::vector<double>& buffer) {
    if (cursor_ >= rows_) return false;
    const std::size_t count = std::min(block_rows_, rows_ - cursor_);
    out.index = cursor_ / block_rows_;
    out.row0 = cursor_;
    out.rows = count;
    out.cols = cols_;
    if (matrix_) {
        out.data = matrix_->data() + cursor_ * cols_;
    } else {
        buffer.resize(count * cols_);
        const auto offset = static_cast<std::streamoff>(kRnlaHeaderBytes + cursor_ * cols_ * sizeof(double));
        file_->clear();
        file_->seekg(offset);
        file_->read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(double)));
        if (!*file_) fail(ErrorCode::Io, path_ + ": read failed at row " + std::to_string(cursor_));
        swap_doubles(buffer.data(), buffer.size());
        out.data = buffer.data();
    }
    cursor_ += count;
    return true;
}

void RowBlockStream::for_each_block(CostLedger* ledger, const std::function<void(const RowBlock&)>& fn,
                                    bool parallel) {
    reset();
    const std::size_t group = parallel ? std::max<std::size_t>(1, parallel::threads()) : 1;
    std::vector<std::vector<double>> buffers(group);
    std::vector<RowBlock> blocks(group);
    for (;;) {
        std::size_t got = 0;
        while (got < group && next(blocks[got], buffers[got])) ++got;
        if (got == 0) break;
        parallel::for_each_task(got, [&](std::size_t t) { fn(blocks[t]); });
        if (got < group) break;
    }
    if (ledger) ledger->add_pass(2.0 * static_cast<double>(rows_) * static_cast<double>(cols_));
    reset();
}

DenseMatrix RowBlockStream::materialize() {
    if (matrix_) return *matrix_;
    DenseMatrix a(rows_, cols_);
    for_each_block(nullptr, [&](const RowBlock& b) { std::copy_n(b.data, b.rows * b.cols, a.data() + b.row0 * cols_); });
    return a;
}

Vector stream_matvec(RowBlockStream& stream, std::span<const double> x, CostLedger* ledger) {
    require(x.size() == stream.cols(), ErrorCode::DimensionMismatch, "stream_matvec: size mismatch");
    Vector y(stream.rows());
    stream.for_each_block(ledger, [&](const RowBlock& b) {
        for (std::size_t i = 0; i < b.rows; ++i) y[b.row0 + i] = kernels::dot(b.data + i * b.cols, x.data(), b.cols);
    });
    return y;
}

Vector stream_matvec_t(RowBlockStream& stream, std::span<const double> u, CostLedger* ledger) {
    require(u.size() == stream.rows(), ErrorCode::DimensionMismatch, "stream_matvec_t: size mismatch");
    const std::size_t n = stream.cols();
    return map_blocks<Vector>(
        stream, ledger,
        [&](const RowBlock& b) {
            Vector part(n, 0.0);
            for (std::size_t i = 0; i < b.rows; ++i) kernels::axpy(u[b.row0 + i], b.data + i * b.cols, part.data(), n);
            return part;
        },
        [](Vector a, Vector b) {
            for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
            return a;
        });
}

} // namespace sketchreg
