#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lcmdp {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
std::vector<double> multiply(const Matrix& a, std::span<const double> x);
/// Row vector times matrix: returns x^T A.
std::vector<double> left_multiply(std::span<const double> x, const Matrix& a);
Matrix kronecker(const Matrix& a, const Matrix& b);

/// Largest absolute deviation of any row sum from one; also fails on negative entries.
double row_stochastic_defect(const Matrix& m);
bool is_row_stochastic(const Matrix& m, double tol);

/// Compressed sparse row copy of a square matrix; exact zeros are dropped.
struct SparseMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    static SparseMatrix from_dense(const Matrix& m);
    std::size_t nnz() const { return val.size(); }
};

} // namespace lcmdp
