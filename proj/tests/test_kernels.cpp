#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vitray/kernels.hpp"
#include "vitray/rng.hpp"
#include "testutil.hpp"

using namespace vitray;

namespace {

std::vector<double> random_vec(std::size_t n, SplitMix64& rng, double lo = -2.0,
                               double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = lo + (hi - lo) * rng.next_double();
    return v;
}

} // namespace

TEST_CASE("matmul hand-computed 2x2") {
    std::vector<double> a{1, 2, 3, 4};
    std::vector<double> b{5, 6, 7, 8};
    std::vector<double> c(4);
    kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
    CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("matmul identity and annihilator") {
    SplitMix64 rng(7);
    std::vector<double> b = random_vec(4, rng);
    std::vector<double> eye{1, 0, 0, 1};
    std::vector<double> zero(4, 0.0);
    std::vector<double> c(4);
    kernels::matmul(eye.data(), b.data(), c.data(), 2, 2, 2);
    CHECK(c == b);
    kernels::matmul(b.data(), zero.data(), c.data(), 2, 2, 2);
    CHECK(c == std::vector<double>(4, 0.0));
}

TEST_CASE("matmul associativity on random chains") {
    SplitMix64 rng(11);
    for (int iter = 0; iter < 20; ++iter) {
        std::size_t m = 1 + rng.next_below(12), k = 1 + rng.next_below(12);
        std::size_t n = 1 + rng.next_below(12), q = 1 + rng.next_below(12);
        auto a = random_vec(m * k, rng);
        auto b = random_vec(k * n, rng);
        auto c = random_vec(n * q, rng);
        std::vector<double> ab(m * n), abc1(m * q), bc(k * q), abc2(m * q);
        kernels::matmul(a.data(), b.data(), ab.data(), m, k, n);
        kernels::matmul(ab.data(), c.data(), abc1.data(), m, n, q);
        kernels::matmul(b.data(), c.data(), bc.data(), k, n, q);
        kernels::matmul(a.data(), bc.data(), abc2.data(), m, k, q);
        for (std::size_t i = 0; i < abc1.size(); ++i) {
            CHECK(testutil::rel_err(abc1[i], abc2[i]) < 1e-9);
        }
    }
}

TEST_CASE("transposed matmul variants agree with explicit transposition") {
    SplitMix64 rng(13);
    const std::size_t m = 5, k = 7, n = 4;
    auto a = random_vec(m * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<double> bt(n * k), at(k * m);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];

    std::vector<double> want(m * n), got(m * n);
    kernels::matmul(a.data(), b.data(), want.data(), m, k, n);
    kernels::matmul_nt(a.data(), bt.data(), got.data(), m, k, n);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]));

    std::vector<double> got_tn(m * n);
    kernels::matmul_tn(at.data(), b.data(), got_tn.data(), k, m, n);
    // (A^T)^T B = A B
    for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got_tn[i] == doctest::Approx(want[i]));
}

TEST_CASE("parallel kernels match the serial reference bitwise") {
    SplitMix64 rng(17);
    // Sizes straddle the dispatch threshold so both paths execute.
    for (std::size_t m : {3u, 96u}) {
        for (std::size_t k : {5u, 64u}) {
            for (std::size_t n : {4u, 128u}) {
                auto a = random_vec(m * k, rng);
                auto b = random_vec(k * n, rng);
                std::vector<double> c1(m * n), c2(m * n);
                kernels::serial::matmul(a.data(), b.data(), c1.data(), m, k, n);
                kernels::matmul(a.data(), b.data(), c2.data(), m, k, n);
                CHECK(c1 == c2);
            }
        }
    }

    const std::size_t big = 1u << 17;
    auto x = random_vec(big, rng);
    auto y = random_vec(big, rng);
    std::vector<double> out1(big), out2(big);
    kernels::serial::add(x.data(), y.data(), out1.data(), big);
    kernels::add(x.data(), y.data(), out2.data(), big);
    CHECK(out1 == out2);
    kernels::serial::mul(x.data(), y.data(), out1.data(), big);
    kernels::mul(x.data(), y.data(), out2.data(), big);
    CHECK(out1 == out2);
    kernels::serial::gelu(x.data(), out1.data(), big);
    kernels::gelu(x.data(), out2.data(), big);
    CHECK(out1 == out2);

    const std::size_t rows = 512, cols = 384;
    auto mat = random_vec(rows * cols, rng);
    std::vector<double> s1(rows * cols), s2(rows * cols);
    kernels::serial::softmax_slices(mat.data(), s1.data(), rows, cols, 1);
    kernels::softmax_slices(mat.data(), s2.data(), rows, cols, 1);
    CHECK(s1 == s2);

    auto gamma = random_vec(cols, rng, 0.5, 1.5);
    auto beta = random_vec(cols, rng);
    std::vector<double> y1(rows * cols), y2(rows * cols);
    std::vector<double> mu1(rows), mu2(rows), rs1(rows), rs2(rows);
    kernels::serial::layer_norm_rows(mat.data(), gamma.data(), beta.data(), 1e-6, y1.data(),
                                     mu1.data(), rs1.data(), rows, cols);
    kernels::layer_norm_rows(mat.data(), gamma.data(), beta.data(), 1e-6, y2.data(),
                             mu2.data(), rs2.data(), rows, cols);
    CHECK(y1 == y2);
    CHECK(mu1 == mu2);
    CHECK(rs1 == rs2);

    std::vector<double> cs1(cols), cs2(cols);
    kernels::serial::col_sum(mat.data(), cs1.data(), rows, cols);
    kernels::col_sum(mat.data(), cs2.data(), rows, cols);
    CHECK(cs1 == cs2);
}

TEST_CASE("softmax rows: normalization, positivity, shift invariance") {
    SplitMix64 rng(23);
    const std::size_t rows = 40, cols = 9;
    auto x = random_vec(rows * cols, rng);
    std::vector<double> y(x.size());
    kernels::softmax_slices(x.data(), y.data(), rows, cols, 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            CHECK(y[r * cols + j] > 0.0);
            s += y[r * cols + j];
        }
        CHECK(std::fabs(s - 1.0) <= 1e-12);
    }

    auto shifted = x;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) shifted[r * cols + j] += 17.5;
    }
    std::vector<double> ys(x.size());
    kernels::softmax_slices(shifted.data(), ys.data(), rows, cols, 1);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::fabs(y[i] - ys[i]) <= 1e-12);
}

TEST_CASE("softmax along a non-trailing axis (inner stride)") {
    // 2 x 3 viewed with the softmax along axis 0: outer=1, len=2, inner=3.
    std::vector<double> x{0, 0, 1, 0, std::log(3.0), 1};
    std::vector<double> y(6);
    kernels::softmax_slices(x.data(), y.data(), 1, 2, 3);
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[3] == doctest::Approx(0.5));
    CHECK(y[1] == doctest::Approx(0.25));
    CHECK(y[4] == doctest::Approx(0.75));
    CHECK(y[2] == doctest::Approx(0.5));
    CHECK(y[5] == doctest::Approx(0.5));
}

TEST_CASE("gelu closed-form points") {
    std::vector<double> x{0.0, 1.0, 10.0, -10.0};
    std::vector<double> y(4);
    kernels::gelu(x.data(), y.data(), 4);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == doctest::Approx(0.841345).epsilon(1e-6));
    CHECK(std::fabs(y[2] - 10.0) < 1e-6);
    CHECK(std::fabs(y[3]) < 1e-6);
}

TEST_CASE("sum is a plain sequential reduction") {
    std::vector<double> x{0.1, 0.2, 0.3};
    CHECK(kernels::sum(x.data(), 3) == ((0.1 + 0.2) + 0.3));
}
