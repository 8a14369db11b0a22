#include <doctest.h>

#include "ners/kernels.hpp"
#include "ners/rng.hpp"

using ners::Matrix;
namespace kernels = ners::kernels;

namespace {

Matrix random_matrix(int rows, int cols, ners::Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
    return m;
}

// Plain triple-loop reference with the same per-element summation order.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

struct ParallelGuard {
    bool saved = kernels::parallel_enabled();
    ~ParallelGuard() { kernels::set_parallel(saved); }
};

}  // namespace

TEST_CASE("matmul matches the naive reference bitwise") {
    ners::Rng rng(11);
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 4, 5}, {17, 9, 13}, {64, 32, 16}}) {
        const Matrix a = random_matrix(m, k, rng);
        const Matrix b = random_matrix(k, n, rng);
        Matrix c;
        kernels::matmul_serial(a, b, c);
        CHECK(bitwise_equal(c, naive_matmul(a, b)));
    }
}

TEST_CASE("openmp kernels are bitwise identical to the serial reference") {
    ParallelGuard guard;
    ners::Rng rng(12);
    for (auto [m, k, n] : {std::tuple{5, 7, 3}, {33, 17, 65}, {128, 11, 64}, {257, 64, 31}}) {
        const Matrix a = random_matrix(m, k, rng);
        const Matrix b = random_matrix(k, n, rng);

        kernels::set_parallel(true);
        Matrix c_par, ref;
        kernels::matmul(a, b, c_par);
        kernels::matmul_serial(a, b, ref);
        CHECK(bitwise_equal(c_par, ref));

        const Matrix bt = random_matrix(n, k, rng);
        Matrix nt_par, nt_ref;
        kernels::matmul_nt(a, bt, nt_par);
        kernels::matmul_nt_serial(a, bt, nt_ref);
        CHECK(bitwise_equal(nt_par, nt_ref));

        const Matrix a2 = random_matrix(k, m, rng);
        const Matrix b2 = random_matrix(k, n, rng);
        Matrix tn_par, tn_ref;
        kernels::matmul_tn(a2, b2, tn_par);
        kernels::matmul_tn_serial(a2, b2, tn_ref);
        CHECK(bitwise_equal(tn_par, tn_ref));

        std::vector<double> cs_par, cs_ref;
        kernels::col_sums(a, cs_par);
        kernels::col_sums_serial(a, cs_ref);
        CHECK(cs_par == cs_ref);
    }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
    ners::Rng rng(13);
    const Matrix a = random_matrix(6, 4, rng);
    const Matrix b = random_matrix(9, 4, rng);
    Matrix c;
    kernels::matmul_nt_serial(a, b, c);
    Matrix bt(4, 9);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 4; ++j) bt(j, i) = b(i, j);
    const Matrix expected = naive_matmul(a, bt);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-12));

    const Matrix a2 = random_matrix(5, 7, rng);
    const Matrix b2 = random_matrix(5, 3, rng);
    Matrix c2;
    kernels::matmul_tn_serial(a2, b2, c2);
    Matrix a2t(7, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 7; ++j) a2t(j, i) = a2(i, j);
    const Matrix expected2 = naive_matmul(a2t, b2);
    for (std::size_t i = 0; i < c2.size(); ++i)
        CHECK(c2.data[i] == doctest::Approx(expected2.data[i]).epsilon(1e-12));
}

TEST_CASE("add_bias adds the same vector to every row") {
    ners::Rng rng(14);
    Matrix c = random_matrix(8, 5, rng);
    const Matrix before = c;
    std::vector<double> bias{1.0, -2.0, 0.5, 0.0, 3.0};
    kernels::add_bias(c, bias);
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j) CHECK(c(i, j) == before(i, j) + bias[j]);
}

TEST_CASE("permutation-invariant column mean is exactly stable under row shuffles") {
    ners::Rng rng(15);
    const Matrix a = random_matrix(33, 7, rng);
    const std::vector<double> base = kernels::permutation_invariant_col_mean(a);

    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<std::size_t> perm = rng.sample_without_replacement(33, 33);
        Matrix shuffled(a.rows, a.cols);
        for (int i = 0; i < a.rows; ++i)
            for (int j = 0; j < a.cols; ++j) shuffled(i, j) = a(static_cast<int>(perm[i]), j);
        const std::vector<double> permuted = kernels::permutation_invariant_col_mean(shuffled);
        CHECK(base == permuted);  // bitwise
    }

    // And it is still an ordinary mean.
    std::vector<double> sums;
    kernels::col_sums_serial(a, sums);
    for (int j = 0; j < a.cols; ++j)
        CHECK(base[j] == doctest::Approx(sums[j] / a.rows).epsilon(1e-12));
}

TEST_CASE("kernels reject dimension mismatches") {
    const Matrix a(3, 4);
    const Matrix b(5, 2);
    Matrix c;
    CHECK_THROWS_AS(kernels::matmul(a, b, c), std::invalid_argument);
    Matrix d(3, 2);
    std::vector<double> bias{1.0};
    CHECK_THROWS_AS(kernels::add_bias(d, bias), std::invalid_argument);
}
