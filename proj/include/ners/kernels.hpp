#pragma once

#include <cstddef>
#include <vector>

namespace ners {

// Row-major dense matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    std::size_t size() const { return data.size(); }
};

namespace kernels {

// Toggles the OpenMP dispatch below. The serial versions are the reference;
// per output element both variants execute the same inner loop in the same
// order, so results are bitwise identical either way.
void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

// C = A * B          (A: m x k, B: k x n)
void matmul_serial(const Matrix& a, const Matrix& b, Matrix& c);
void matmul(const Matrix& a, const Matrix& b, Matrix& c);

// C = A * B^T        (A: m x k, B: n x k)
void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

// C = A^T * B        (A: k x m, B: k x n)
void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);

// out[j] = sum over rows of a(:, j)
void col_sums_serial(const Matrix& a, std::vector<double>& out);
void col_sums(const Matrix& a, std::vector<double>& out);

// c(i, :) += bias
void add_bias_serial(Matrix& c, const std::vector<double>& bias);
void add_bias(Matrix& c, const std::vector<double>& bias);

// Column means of a, with each column's addends sorted before summation so
// the result is bitwise identical under any row permutation of a.
std::vector<double> permutation_invariant_col_mean(const Matrix& a);

}  // namespace kernels
}  // namespace ners
