#pragma once

#include "sdd/error.hpp"
#include "sdd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

// =============================================================================
// Dense row-major f64 matrix plus the handful of kernels the rest of the
// library needs. Not BLAS-competitive by design; summation order is fixed so
// results are reproducible run to run.
// =============================================================================

namespace sdd {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 0.0); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    // i.i.d. standard normal entries, row-major fill order.
    static Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols) {
        if (rows < 1 || cols < 1) throw DomainError("gaussian: rows, cols must be >= 1");
        Matrix m(rows, cols);
        for (double& x : m.v_) x = rng.gaussian();
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return v_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return v_[i * cols_ + j]; }

    double* data() noexcept { return v_.data(); }
    const double* data() const noexcept { return v_.data(); }
    double* row(std::size_t i) noexcept { return v_.data() + i * cols_; }
    const double* row(std::size_t i) const noexcept { return v_.data() + i * cols_; }

    bool same_shape(const Matrix& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    bool all_finite() const noexcept {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    // Columns [c0, c1) as a copy.
    Matrix slice_cols(std::size_t c0, std::size_t c1) const {
        if (c0 > c1 || c1 > cols_) throw ShapeError("slice_cols: bad column range");
        Matrix out(rows_, c1 - c0);
        for (std::size_t i = 0; i < rows_; ++i)
            std::copy(row(i) + c0, row(i) + c1, out.row(i));
        return out;
    }

    // [a | b] side by side.
    static Matrix hcat(const Matrix& a, const Matrix& b) {
        if (a.rows() != b.rows()) throw ShapeError("hcat: row counts differ");
        Matrix out(a.rows(), a.cols() + b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            std::copy(a.row(i), a.row(i) + a.cols(), out.row(i));
            std::copy(b.row(i), b.row(i) + b.cols(), out.row(i) + a.cols());
        }
        return out;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

namespace detail {

// Splits [0, n) into contiguous chunks, one thread per chunk. Each chunk owns
// disjoint output rows, so parallel execution is bit-identical to serial.
template <typename Fn>
inline void parallel_rows(std::size_t n, std::size_t min_work_per_row, Fn&& fn) {
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t max_threads = hw == 0 ? 1 : hw;
    std::size_t n_threads = std::min<std::size_t>(max_threads, n);
    if (n_threads <= 1 || n * min_work_per_row < (1u << 20)) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    const std::size_t chunk = (n + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace detail

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    detail::parallel_rows(a.rows(), a.cols() * b.cols(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* ci = c.row(i);
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double aik = a(i, k);
                const double* bk = b.row(k);
                for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

// C = A^T * B  (no explicit transpose)
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_at: row counts differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            double* ck = c.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ck[j] += aik * bi[j];
        }
    }
    return c;
}

// C = A * B^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_bt: col counts differ");
    Matrix c(a.rows(), b.rows());
    detail::parallel_rows(a.rows(), a.cols() * b.rows(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* ai = a.row(i);
            for (std::size_t j = 0; j < b.rows(); ++j) {
                const double* bj = b.row(j);
                double s = 0.0;
                for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
                c(i, j) = s;
            }
        }
    });
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

namespace detail {

template <typename Op>
inline Matrix elementwise(const Matrix& a, const Matrix& b, Op op, const char* name) {
    if (!a.same_shape(b)) throw ShapeError(std::string(name) + ": shape mismatch");
    Matrix c(a.rows(), a.cols());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (std::size_t i = 0; i < a.size(); ++i) pc[i] = op(pa[i], pb[i]);
    return c;
}

}  // namespace detail

inline Matrix add(const Matrix& a, const Matrix& b) {
    return detail::elementwise(a, b, [](double x, double y) { return x + y; }, "add");
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    return detail::elementwise(a, b, [](double x, double y) { return x - y; }, "sub");
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    return detail::elementwise(a, b, [](double x, double y) { return x * y; }, "hadamard");
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] * s;
    return c;
}

// a += s * b
inline void axpy_inplace(Matrix& a, double s, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("axpy: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += s * b.data()[i];
}

// Broadcast-add a 1 x cols row vector to every row.
inline void add_row_inplace(Matrix& a, const Matrix& r) {
    if (r.rows() != 1 || r.cols() != a.cols()) throw ShapeError("add_row: need 1 x cols vector");
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) ai[j] += r(0, j);
    }
}

// Column sums as a 1 x cols matrix.
inline Matrix colsum(const Matrix& a) {
    Matrix s(1, a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(0, j) += a(i, j);
    return s;
}

}  // namespace sdd
