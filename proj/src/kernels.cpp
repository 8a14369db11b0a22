#include "ners/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ners::kernels {

namespace {
std::atomic<bool> g_parallel{true};

void check_dims(bool ok) {
    if (!ok) throw std::invalid_argument("kernels: matrix dimension mismatch");
}

// One output row of C = A*B, i-k-j order (contiguous in j, vectorizes).
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
    double* crow = c.row(i);
    std::fill(crow, crow + c.cols, 0.0);
    const double* arow = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
        const double aik = arow[k];
        const double* brow = b.row(k);
        for (int j = 0; j < c.cols; ++j) crow[j] += aik * brow[j];
    }
}

// One output row of C = A*B^T: c(i,j) = dot(a.row(i), b.row(j)).
inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < c.cols; ++j) {
        const double* brow = b.row(j);
        double acc = 0.0;
        for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
        crow[j] = acc;
    }
}

// One output row of C = A^T*B: c(i,j) = sum_k a(k,i) * b(k,j).
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, int i) {
    double* crow = c.row(i);
    std::fill(crow, crow + c.cols, 0.0);
    for (int k = 0; k < a.rows; ++k) {
        const double aki = a(k, i);
        const double* brow = b.row(k);
        for (int j = 0; j < c.cols; ++j) crow[j] += aki * brow[j];
    }
}

inline void col_sum_one(const Matrix& a, std::vector<double>& out, int j) {
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i) acc += a(i, j);
    out[j] = acc;
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.cols == b.rows);
    c = Matrix(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) matmul_row(a, b, c, i);
}

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.cols == b.rows);
    c = Matrix(a.rows, b.cols);
#pragma omp parallel for schedule(static) if (g_parallel.load())
    for (int i = 0; i < a.rows; ++i) matmul_row(a, b, c, i);
}

void matmul_nt_serial(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.cols == b.cols);
    c = Matrix(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, c, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.cols == b.cols);
    c = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (g_parallel.load())
    for (int i = 0; i < a.rows; ++i) matmul_nt_row(a, b, c, i);
}

void matmul_tn_serial(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.rows == b.rows);
    c = Matrix(a.cols, b.cols);
    for (int i = 0; i < a.cols; ++i) matmul_tn_row(a, b, c, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    check_dims(a.rows == b.rows);
    c = Matrix(a.cols, b.cols);
#pragma omp parallel for schedule(static) if (g_parallel.load())
    for (int i = 0; i < a.cols; ++i) matmul_tn_row(a, b, c, i);
}

void col_sums_serial(const Matrix& a, std::vector<double>& out) {
    out.assign(a.cols, 0.0);
    for (int j = 0; j < a.cols; ++j) col_sum_one(a, out, j);
}

void col_sums(const Matrix& a, std::vector<double>& out) {
    out.assign(a.cols, 0.0);
#pragma omp parallel for schedule(static) if (g_parallel.load())
    for (int j = 0; j < a.cols; ++j) col_sum_one(a, out, j);
}

void add_bias_serial(Matrix& c, const std::vector<double>& bias) {
    check_dims(static_cast<int>(bias.size()) == c.cols);
    for (int i = 0; i < c.rows; ++i) {
        double* crow = c.row(i);
        for (int j = 0; j < c.cols; ++j) crow[j] += bias[j];
    }
}

void add_bias(Matrix& c, const std::vector<double>& bias) {
    check_dims(static_cast<int>(bias.size()) == c.cols);
#pragma omp parallel for schedule(static) if (g_parallel.load())
    for (int i = 0; i < c.rows; ++i) {
        double* crow = c.row(i);
        for (int j = 0; j < c.cols; ++j) crow[j] += bias[j];
    }
}

std::vector<double> permutation_invariant_col_mean(const Matrix& a) {
    std::vector<double> out(a.cols, 0.0);
    if (a.rows == 0) return out;
    std::vector<double> column(a.rows);
    for (int j = 0; j < a.cols; ++j) {
        for (int i = 0; i < a.rows; ++i) column[i] = a(i, j);
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (double v : column) acc += v;
        out[j] = acc / a.rows;
    }
    return out;
}

}  // namespace ners::kernels
