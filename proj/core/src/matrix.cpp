#include "gwm/matrix.hpp"

#include <algorithm>

namespace gwm {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) {
            raise(Errc::ShapeMismatch, "triplet index out of range");
        }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });

    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
            // duplicate coordinate: coalesce by summation
            m.values_.back() += t.value;
            continue;
        }
        m.col_idx_.push_back(t.col);
        m.values_.push_back(t.value);
        m.row_ptr_[t.row + 1] += 1;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        m.row_ptr_[r + 1] += m.row_ptr_[r];
    }
    return m;
}

double SparseMatrix::value_at(std::size_t r, std::size_t c) const {
    auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(begin, end, c);
    if (it == end || *it != c) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

bool SparseMatrix::is_symmetric() const {
    if (rows_ != cols_) return false;
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
            if (values_[i] != value_at(col_idx_[i], r)) return false;
        }
    }
    return true;
}

std::vector<double> SparseMatrix::row_sums() const {
    std::vector<double> sums(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (std::size_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
            acc += values_[i];
        }
        sums[r] = acc;
    }
    return sums;
}

void SparseMatrix::multiply_into(std::span<const double> x, std::size_t x_cols,
                                 std::span<double> out) const {
    if (x.size() != cols_ * x_cols || out.size() != rows_ * x_cols) {
        raise(Errc::ShapeMismatch, "sparse multiply operand shapes disagree");
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double* dst = out.data() + r * x_cols;
        for (std::size_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
            const double v = values_[i];
            const double* src = x.data() + col_idx_[i] * x_cols;
            for (std::size_t c = 0; c < x_cols; ++c) {
                dst[c] += v * src[c];
            }
        }
    }
}

Matrix SparseMatrix::multiply(const Matrix& x) const {
    if (x.rows != cols_) {
        raise(Errc::ShapeMismatch, "sparse multiply: row count of operand disagrees");
    }
    Matrix out(rows_, x.cols);
    multiply_into(x.data, x.cols, out.data);
    return out;
}

Matrix SparseMatrix::to_dense() const {
    Matrix m(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
            m.at(r, col_idx_[i]) = values_[i];
        }
    }
    return m;
}

std::size_t SparseMatrix::entry_row(std::size_t entry) const {
    auto it = std::upper_bound(row_ptr_.begin(), row_ptr_.end(), entry);
    return static_cast<std::size_t>(it - row_ptr_.begin()) - 1;
}

} // namespace gwm
