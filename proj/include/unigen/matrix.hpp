#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "unigen/errors.hpp"
#include "unigen/rng.hpp"

namespace unigen {

// Dense row-major matrix of doubles. All model math runs in double: the
// momentum closed-form and gradient checks need more headroom than float.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return a.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }
    void zero() { fill(0.0); }

    static Matrix zeros(int r, int c) { return Matrix(r, c); }

    static Matrix filled(int r, int c, double v) {
        Matrix m(r, c);
        m.fill(v);
        return m;
    }

    static Matrix randn(int r, int c, Rng& rng, double stddev = 1.0) {
        Matrix m(r, c);
        for (auto& x : m.a) x = rng.normal(0.0, stddev);
        return m;
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.rows);
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double v = a.at(i, k);
            if (v == 0.0) continue;
            const double* brow = &b.a[static_cast<std::size_t>(k) * b.cols];
            double* orow = &out.a[static_cast<std::size_t>(i) * out.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += v * brow[j];
        }
    }
    return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.cols);
    Matrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.a[static_cast<std::size_t>(i) * a.cols];
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = &b.a[static_cast<std::size_t>(j) * b.cols];
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            out.at(i, j) = s;
        }
    }
    return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    assert(a.rows == b.rows);
    Matrix out(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = &a.a[static_cast<std::size_t>(k) * a.cols];
        const double* brow = &b.a[static_cast<std::size_t>(k) * b.cols];
        for (int i = 0; i < a.cols; ++i) {
            const double v = arow[i];
            if (v == 0.0) continue;
            double* orow = &out.a[static_cast<std::size_t>(i) * out.cols];
            for (int j = 0; j < b.cols; ++j) orow[j] += v * brow[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

inline void add_inplace(Matrix& a, const Matrix& b, double scale = 1.0) {
    assert(a.same_shape(b));
    for (std::size_t i = 0; i < a.a.size(); ++i) a.a[i] += scale * b.a[i];
}

inline double dot_all(const Matrix& a, const Matrix& b) {
    assert(a.same_shape(b));
    double s = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i) s += a.a[i] * b.a[i];
    return s;
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.a) m = std::max(m, std::fabs(x));
    return m;
}

inline bool all_finite(const Matrix& a) {
    for (double x : a.a)
        if (!std::isfinite(x)) return false;
    return true;
}

// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& z) {
    Matrix out(z.rows, z.cols);
    for (int i = 0; i < z.rows; ++i) {
        double mx = z.at(i, 0);
        for (int j = 1; j < z.cols; ++j) mx = std::max(mx, z.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < z.cols; ++j) {
            const double e = std::exp(z.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < z.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

inline int argmax_row(const Matrix& m, int row) {
    int best = 0;
    for (int j = 1; j < m.cols; ++j)
        if (m.at(row, j) > m.at(row, best)) best = j;
    return best;
}

} // namespace unigen
