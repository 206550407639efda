#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tensor_ops.hpp"

using namespace dyf;

namespace {

Mat random_mat(std::mt19937_64& g, std::size_t r, std::size_t c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat m(r, c);
    for (auto& v : m.a) v = u(g);
    return m;
}

Vec random_vec(std::mt19937_64& g, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (auto& x : v) x = u(g);
    return v;
}

}  // namespace

TEST_CASE("linear: identity, zero, naive loop") {
    std::mt19937_64 g(1);
    Vec x = random_vec(g, 5);
    CHECK(linear(Mat::identity(5), x) == x);
    Vec z = linear(Mat(3, 5), x);
    for (double v : z) CHECK(v == 0.0);
    for (int rep = 0; rep < 50; ++rep) {
        Mat m = random_mat(g, 5, 5);
        Vec y = linear(m, x);
        for (std::size_t i = 0; i < 5; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 5; ++j) s += m(i, j) * x[j];
            CHECK(std::abs(s - y[i]) <= 1e-15);
        }
    }
    CHECK_THROWS_AS(linear(Mat(2, 3), x), DimError);
}

TEST_CASE("matmul and stacking check shapes") {
    Mat a(2, 3), b(3, 4);
    a(0, 1) = 2.0;
    b(1, 3) = 5.0;
    Mat c = matmul(a, b);
    CHECK(c.rows == 2);
    CHECK(c.cols == 4);
    CHECK(c(0, 3) == 10.0);
    CHECK_THROWS_AS(matmul(a, a), DimError);
    CHECK(vstack(a, a).rows == 4);
    CHECK(hstack(a, a).cols == 6);
    CHECK_THROWS_AS(vstack(a, b), DimError);
}

TEST_CASE("softmax closed forms and shift invariance") {
    Vec u = softmax(Vec(4, 0.0));
    for (double v : u) CHECK(v == 0.25);
    Vec p = softmax({std::log(3.0), 0.0});
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS(softmax({1.0, std::nan("")}));

    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> uc(-50.0, 50.0);
    for (int rep = 0; rep < 1000; ++rep) {
        Vec s = random_vec(g, 6, -10.0, 10.0);
        // s + c rounds, so agreement is at the rounding level of |c|.
        double c = std::round(uc(g));
        Vec t = s;
        for (auto& v : t) v += c;
        Vec a = softmax(s), b = softmax(t);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) <= 1e-13);
            CHECK(a[i] > 0.0);
            sum += a[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    // Huge scores must not overflow.
    Vec h = softmax({1e6, 1e6 - 1.0});
    CHECK(std::isfinite(h[0]));
}

TEST_CASE("hardmax and its softmax limit") {
    CHECK(hardmax({1.0, 3.0, 2.0}) == Vec{0.0, 1.0, 0.0});
    CHECK(hardmax({2.0, 2.0}) == Vec{0.5, 0.5});
    std::mt19937_64 g(3);
    for (int rep = 0; rep < 200; ++rep) {
        Vec s = random_vec(g, 5);
        Vec cs = s;
        for (auto& v : cs) v *= 1e4;
        Vec a = softmax(cs), b = hardmax(s);
        // Distinctness at the 1e-4 scale keeps the limit within 1e-9 comfortably.
        Vec sorted = s;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[4] - sorted[3] < 5e-3) continue;
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
    }
}

TEST_CASE("relu") { CHECK(relu({-1.0, 0.0, 2.0}) == Vec{0.0, 0.0, 2.0}); }

TEST_CASE("rms layernorm") {
    Vec y{3.0, 4.0, 0.0, 0.0};
    Vec o = rms_layernorm(y, Vec(4, 1.0), Vec(4, 0.0));
    CHECK(o[0] == doctest::Approx(1.2).epsilon(1e-15));
    CHECK(o[1] == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(o[2] == 0.0);

    std::mt19937_64 g(4);
    for (int rep = 0; rep < 100; ++rep) {
        Vec v = random_vec(g, 7);
        Vec n = rms_layernorm(v, Vec(7, std::sqrt(1.0 / 7.0)), Vec(7, 0.0));
        CHECK(norm2(n) == doctest::Approx(1.0).epsilon(1e-14));
        Vec sv = v;
        for (auto& x : sv) x *= 3.5;
        Vec ns = rms_layernorm(sv, Vec(7, 1.0), Vec(7, 0.0));
        Vec n1 = rms_layernorm(v, Vec(7, 1.0), Vec(7, 0.0));
        for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(ns[i] - n1[i]) <= 1e-14);
    }
    Vec beta{1.0, 2.0, 3.0};
    CHECK(rms_layernorm(Vec(3, 0.0), Vec(3, 1.0), beta) == beta);
    CHECK_THROWS_AS(rms_layernorm(Vec(3, 1.0), Vec(2, 1.0), beta), DimError);
}

TEST_CASE("layernorm") {
    std::mt19937_64 g(5);
    for (int rep = 0; rep < 100; ++rep) {
        Vec v = random_vec(g, 6);
        double m = 0.0;
        for (double x : v) m += x / 6.0;
        for (auto& x : v) x -= m;
        Vec gam = random_vec(g, 6), bet = random_vec(g, 6);
        Vec a = layernorm(v, gam, bet), b = rms_layernorm(v, gam, bet);
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    }
    Vec beta{0.5, -1.0};
    CHECK(layernorm(Vec(2, 7.0), Vec(2, 1.0), beta) == beta);
    for (int rep = 0; rep < 100; ++rep) {
        Vec v = random_vec(g, 5);
        Vec o = layernorm(v, Vec(5, 2.0), Vec(5, 0.75));
        double m = 0.0;
        for (double x : o) m += x / 5.0;
        CHECK(std::abs(m - 0.75) <= 1e-12);
    }
}
