// Times the OpenMP kernel dispatch against the serial reference on net-sized
// matmuls and checks that both produce bitwise-identical results.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ners/kernels.hpp"
#include "ners/rng.hpp"

using ners::Matrix;
namespace kernels = ners::kernels;

namespace {

Matrix random_matrix(int rows, int cols, ners::Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

double time_ms(const std::function<void()>& fn, int iters) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

struct Case {
    const char* name;
    int m, k, n;
};

}  // namespace

int main() {
    ners::Rng rng(7);
    // Shapes covering the desk-scale nets and the full-width variants.
    const std::vector<Case> cases = {
        {"batch x small net", 128, 11, 64},    {"batch x wide net", 128, 256, 512},
        {"wide backward", 512, 128, 256},      {"buffer scan x tiny net", 10000, 3, 16},
        {"buffer scan x hidden", 10000, 16, 16},
    };

    std::printf("threads available: %d\n", kernels::thread_count());
    std::printf("%-24s %10s %12s %12s %9s %8s\n", "case", "shape", "serial(ms)", "openmp(ms)",
                "speedup", "equal");
    for (const Case& c : cases) {
        const Matrix a = random_matrix(c.m, c.k, rng);
        const Matrix b = random_matrix(c.k, c.n, rng);
        Matrix ref, par;
        const int iters = c.m >= 10000 ? 20 : 200;

        kernels::set_parallel(false);
        const double t_serial = time_ms([&] { kernels::matmul_serial(a, b, ref); }, iters);
        kernels::set_parallel(true);
        const double t_parallel = time_ms([&] { kernels::matmul(a, b, par); }, iters);

        char shape[32];
        std::snprintf(shape, sizeof(shape), "%dx%dx%d", c.m, c.k, c.n);
        std::printf("%-24s %10s %12.3f %12.3f %8.2fx %8s\n", c.name, shape, t_serial, t_parallel,
                    t_serial / t_parallel, bitwise_equal(ref, par) ? "yes" : "NO");
    }
    return 0;
}
