#pragma once

#include <cstddef>
#include <vector>

#include "zsl/errors.hpp"

namespace zsl {

/// Row-major dense matrix with flat storage.
template <typename T>
struct Dense {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Dense() = default;
    Dense(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Dense& other) const { return rows == other.rows && cols == other.cols; }

    static Dense identity(std::size_t n) {
        Dense m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; spmm reduces in that order so results are bit-stable.
template <typename T>
struct Csr {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_offsets; // rows + 1, non-decreasing
    std::vector<std::size_t> col_indices;
    std::vector<T> values;

    Csr() = default;
    Csr(std::size_t r, std::size_t c) : rows(r), cols(c), row_offsets(r + 1, 0) {}

    std::size_t nnz() const { return values.size(); }

    static Csr identity(std::size_t n) {
        Csr m(n, n);
        m.col_indices.resize(n);
        m.values.assign(n, T(1));
        for (std::size_t i = 0; i < n; ++i) {
            m.row_offsets[i + 1] = i + 1;
            m.col_indices[i] = i;
        }
        return m;
    }
};

template <typename T>
void validate_csr(const Csr<T>& s) {
    if (s.row_offsets.size() != s.rows + 1)
        throw ShapeError("csr: row_offsets length must be rows+1");
    if (s.row_offsets.front() != 0 || s.row_offsets.back() != s.col_indices.size() ||
        s.col_indices.size() != s.values.size())
        throw ShapeError("csr: offsets/indices/values are inconsistent");
    for (std::size_t i = 0; i < s.rows; ++i) {
        if (s.row_offsets[i] > s.row_offsets[i + 1])
            throw ShapeError("csr: row_offsets must be non-decreasing");
        for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p) {
            if (s.col_indices[p] >= s.cols) throw ShapeError("csr: column index out of range");
            if (p > s.row_offsets[i] && s.col_indices[p - 1] >= s.col_indices[p])
                throw ShapeError("csr: column indices must be strictly increasing per row");
        }
    }
}

template <typename T>
Dense<T> densify(const Csr<T>& s) {
    Dense<T> out(s.rows, s.cols);
    for (std::size_t i = 0; i < s.rows; ++i)
        for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p)
            out(i, s.col_indices[p]) = s.values[p];
    return out;
}

using DenseMatrix = Dense<float>;
using SparseMatrix = Csr<float>;

} // namespace zsl
