#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gwm/errors.hpp"

namespace gwm {

// Dense row-major matrix of doubles. Kernels compute in double; on-disk
// formats store float32 and promote on load.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

// Compressed sparse rows, symmetric use only in this project. Column indices
// are strictly increasing within each row; multiplication accumulates in that
// fixed order, which makes results bitwise reproducible.
class SparseMatrix {
public:
    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    SparseMatrix() = default;

    SparseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<Triplet> triplets);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return col_idx_.size(); }

    const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
    const std::vector<std::size_t>& col_idx() const { return col_idx_; }
    const std::vector<double>& values() const { return values_; }

    // 0.0 when the entry is structurally absent.
    double value_at(std::size_t r, std::size_t c) const;

    bool is_symmetric() const;

    std::vector<double> row_sums() const;

    // out = this * x where x is rows()-by-x_cols row-major; out must be
    // rows()-by-x_cols. Accumulation follows CSR order per row.
    void multiply_into(std::span<const double> x, std::size_t x_cols, std::span<double> out) const;

    Matrix multiply(const Matrix& x) const;

    Matrix to_dense() const;

    // Entry-wise transform preserving structure.
    template <typename Fn>
    SparseMatrix map_values(Fn&& fn) const {
        SparseMatrix out = *this;
        for (std::size_t i = 0; i < out.values_.size(); ++i) {
            out.values_[i] = fn(*this, i);
        }
        return out;
    }

    // Row index of the i-th stored entry (for map_values callers).
    std::size_t entry_row(std::size_t entry) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

} // namespace gwm
