#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "zsl/matrix.hpp"

namespace zsl {

/// Floor on row norms in L2 normalization; keeps the zero row at zero and
/// its gradient finite.
inline constexpr double kL2Epsilon = 1e-12;

/// C = A * B. Accumulation over the inner dimension runs in ascending
/// index order for every output entry, so repeated calls are bit-identical.
template <typename T>
Dense<T> matmul(const Dense<T>& a, const Dense<T>& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    Dense<T> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const T* arow = a.data.data() + i * a.cols;
        T* crow = c.data.data() + i * b.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            const T* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

template <typename T>
Dense<T> transpose(const Dense<T>& a) {
    Dense<T> t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

/// Sparse * dense. Within each output row the reduction follows the CSR
/// column order (ascending), fixing the floating-point result.
template <typename T>
Dense<T> spmm(const Csr<T>& s, const Dense<T>& x) {
    if (s.cols != x.rows)
        throw ShapeError("spmm: inner dimensions disagree (" + std::to_string(s.cols) +
                         " vs " + std::to_string(x.rows) + ")");
    Dense<T> out(s.rows, x.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        T* orow = out.data.data() + i * x.cols;
        for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p) {
            const T v = s.values[p];
            const T* xrow = x.data.data() + s.col_indices[p] * x.cols;
            for (std::size_t j = 0; j < x.cols; ++j) orow[j] += v * xrow[j];
        }
    }
    return out;
}

/// y = x for x >= 0, slope * x otherwise. slope in (0, 1).
template <typename T>
Dense<T> leaky_relu(const Dense<T>& x, T slope) {
    Dense<T> y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T v = x.data[i];
        y.data[i] = v >= T(0) ? v : slope * v;
    }
    return y;
}

/// Elementwise upstream * (1 if x >= 0 else slope). The subgradient at
/// exactly 0 is fixed to 1.
template <typename T>
Dense<T> leaky_relu_grad(const Dense<T>& x, const Dense<T>& upstream, T slope) {
    if (!x.same_shape(upstream)) throw ShapeError("leaky_relu_grad: shape mismatch");
    Dense<T> g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        g.data[i] = x.data[i] >= T(0) ? upstream.data[i] : slope * upstream.data[i];
    return g;
}

/// Each row divided by max(||row||, kL2Epsilon); nonzero rows come out
/// unit-norm, zero rows stay zero.
template <typename T>
Dense<T> row_l2_normalize(const Dense<T>& x) {
    Dense<T> y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double v = x(i, j);
            sq += v * v;
        }
        const double denom = std::max(std::sqrt(sq), kL2Epsilon);
        for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = static_cast<T>(x(i, j) / denom);
    }
    return y;
}

/// Per row, with y = x/||x||: grad = (upstream - y * <y, upstream>) / ||x||.
/// Below the epsilon floor the map is linear, so grad = upstream / eps.
template <typename T>
Dense<T> row_l2_normalize_grad(const Dense<T>& x, const Dense<T>& upstream) {
    if (!x.same_shape(upstream)) throw ShapeError("row_l2_normalize_grad: shape mismatch");
    Dense<T> g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double v = x(i, j);
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm < kL2Epsilon) {
            for (std::size_t j = 0; j < x.cols; ++j)
                g(i, j) = static_cast<T>(upstream(i, j) / kL2Epsilon);
            continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j)
            dot += (x(i, j) / norm) * static_cast<double>(upstream(i, j));
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double y = x(i, j) / norm;
            g(i, j) = static_cast<T>((upstream(i, j) - y * dot) / norm);
        }
    }
    return g;
}

} // namespace zsl
