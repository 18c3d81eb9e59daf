#pragma once

#include "sketchreg/matrix.hpp"
#include "sketchreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace testutil {

using sketchreg::DenseMatrix;
using sketchreg::Vector;

inline DenseMatrix gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
    sketchreg::RandomStream rs(sketchreg::derive_stream(seed, 77));
    DenseMatrix a(m, n);
    rs.fill_normal(a.storage());
    return a;
}

inline Vector gaussian_vec(std::size_t n, std::uint64_t seed) {
    sketchreg::RandomStream rs(sketchreg::derive_stream(seed, 78));
    Vector v(n);
    rs.fill_normal(v);
    return v;
}

// Naive triple loop product, independent of the blocked kernels.
inline DenseMatrix naive_mul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
            c(i, j) = static_cast<double>(s);
        }
    return c;
}

// Eigenvalues of a symmetric matrix by the classical two-sided cyclic Jacobi
// method, written independently of the library's SVD.
inline std::vector<double> sym_eigenvalues(DenseMatrix s) {
    const std::size_t n = s.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) off += s(i, j) * s(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(s(p, q)) < 1e-300) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = s(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

inline DenseMatrix gram(const DenseMatrix& a) {
    DenseMatrix g(a.cols(), a.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            long double s = 0;
            for (std::size_t k = 0; k < a.rows(); ++k) s += static_cast<long double>(a(k, i)) * a(k, j);
            g(i, j) = static_cast<double>(s);
        }
    return g;
}

// Kolmogorov-Smirnov statistic of samples against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

// Solves the square system M x = y by Gaussian elimination with partial
// pivoting in long double. Returns false when M is numerically singular.
inline bool square_solve(std::vector<long double> m, std::vector<long double> y, std::size_t n,
                         std::vector<double>& x) {
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(m[r * n + c]) > std::fabs(m[piv * n + c])) piv = r;
        if (std::fabs(m[piv * n + c]) < 1e-13L) return false;
        if (piv != c) {
            for (std::size_t k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
            std::swap(y[c], y[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            const long double f = m[r * n + c] / m[c * n + c];
            for (std::size_t k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
            y[r] -= f * y[c];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t c = n; c-- > 0;) {
        long double s = y[c];
        for (std::size_t k = c + 1; k < n; ++k) s -= m[c * n + k] * x[k];
        x[c] = static_cast<double>(s / m[c * n + c]);
    }
    return true;
}

inline double l1_objective(const DenseMatrix& a, const std::vector<double>& b, const std::vector<double>& x) {
    long double f = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        long double r = -static_cast<long double>(b[i]);
        for (std::size_t j = 0; j < a.cols(); ++j) r += static_cast<long double>(a(i, j)) * x[j];
        f += std::fabs(r);
    }
    return static_cast<double>(f);
}

// Objective of the vertex interpolating the given rows; +inf when singular.
inline double l1_vertex(const DenseMatrix& a, const std::vector<double>& b, const std::vector<std::size_t>& rows,
                        std::vector<double>* x_out = nullptr) {
    const std::size_t n = a.cols();
    std::vector<long double> m(n * n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) m[k * n + j] = a(rows[k], j);
        y[k] = b[rows[k]];
    }
    std::vector<double> x;
    if (!square_solve(std::move(m), std::move(y), n, x)) return HUGE_VAL;
    if (x_out) *x_out = x;
    return l1_objective(a, b, x);
}

// Exact l1 optimum by enumerating every n-subset of rows: some optimal
// solution of the LP interpolates n linearly independent rows.
inline double l1_enumerate(const DenseMatrix& a, const std::vector<double>& b) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    double best = HUGE_VAL;
    for (;;) {
        best = std::min(best, l1_vertex(a, b, idx));
        std::size_t k = n;
        while (k-- > 0 && idx[k] == m - n + k) {}
        if (k == static_cast<std::size_t>(-1)) break;
        ++idx[k];
        for (std::size_t t = k + 1; t < n; ++t) idx[t] = idx[t - 1] + 1;
    }
    return best;
}

// Exact l1 optimum by vertex exchange: replace one interpolated row at a time
// while the objective strictly decreases. Adjacent LP vertices differ in one
// row, so a vertex with no improving exchange is optimal.
inline double l1_exchange(const DenseMatrix& a, const std::vector<double>& b, std::vector<double>* x_out = nullptr) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::size_t> rows(n);
    for (std::size_t k = 0; k < n; ++k) rows[k] = k;
    // Slide the starting window until it is nonsingular.
    while (l1_vertex(a, b, rows) == HUGE_VAL && rows.back() + 1 < m)
        for (std::size_t& r : rows) ++r;
    double best = l1_vertex(a, b, rows);
    for (bool improved = true; improved;) {
        improved = false;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t cand = 0; cand < m; ++cand) {
                if (std::find(rows.begin(), rows.end(), cand) != rows.end()) continue;
                std::vector<std::size_t> trial = rows;
                trial[k] = cand;
                const double f = l1_vertex(a, b, trial);
                if (f < best * (1.0 - 1e-14)) {
                    best = f;
                    rows = trial;
                    improved = true;
                }
            }
    }
    if (x_out) l1_vertex(a, b, rows, x_out);
    return best;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

} // namespace testutil
