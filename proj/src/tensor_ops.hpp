#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyf {

using Vec = std::vector<double>;

struct DimError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }
    double* row(std::size_t i) { return a.data() + i * cols; }

    static Mat identity(std::size_t n);
    bool row_is_zero(std::size_t i) const;
};

Vec linear(const Mat& m, const Vec& x);
Mat matmul(const Mat& a, const Mat& b);
Mat vstack(const Mat& top, const Mat& bottom);
Mat hstack(const Mat& left, const Mat& right);
double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);

Vec softmax(const Vec& s);
Vec hardmax(const Vec& s);
Vec relu(Vec x);

// gamma * y / RMS(y) + beta, RMS(y) = sqrt(mean(y^2)); returns beta when RMS is 0.
Vec rms_layernorm(const Vec& y, const Vec& gamma, const Vec& beta);
// gamma * (y - mean) / sigma + beta; returns beta when sigma is 0.
Vec layernorm(const Vec& y, const Vec& gamma, const Vec& beta);

}  // namespace dyf
