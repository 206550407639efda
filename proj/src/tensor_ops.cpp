#include "tensor_ops.hpp"

#include <algorithm>
#include <cmath>

namespace dyf {

namespace {
void need(bool ok, const char* what) {
    if (!ok) throw DimError(what);
}
}  // namespace

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Mat::row_is_zero(std::size_t i) const {
    const double* r = row(i);
    return std::all_of(r, r + cols, [](double v) { return v == 0.0; });
}

Vec linear(const Mat& m, const Vec& x) {
    need(m.cols == x.size(), "linear: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

Mat matmul(const Mat& a, const Mat& b) {
    need(a.cols == b.rows, "matmul: dimension mismatch");
    Mat c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < a.cols; ++l) acc += a(i, l) * b(l, j);
            c(i, j) = acc;
        }
    return c;
}

Mat vstack(const Mat& top, const Mat& bottom) {
    need(top.cols == bottom.cols, "vstack: column mismatch");
    Mat m(top.rows + bottom.rows, top.cols);
    std::copy(top.a.begin(), top.a.end(), m.a.begin());
    std::copy(bottom.a.begin(), bottom.a.end(), m.a.begin() + static_cast<long>(top.a.size()));
    return m;
}

Mat hstack(const Mat& left, const Mat& right) {
    need(left.rows == right.rows, "hstack: row mismatch");
    Mat m(left.rows, left.cols + right.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < left.cols; ++j) m(i, j) = left(i, j);
        for (std::size_t j = 0; j < right.cols; ++j) m(i, left.cols + j) = right(i, j);
    }
    return m;
}

double dot(const Vec& x, const Vec& y) {
    need(x.size() == y.size(), "dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

Vec softmax(const Vec& s) {
    need(!s.empty(), "softmax: empty input");
    double mx = s[0];
    for (double v : s) {
        if (std::isnan(v)) throw std::invalid_argument("softmax: NaN score");
        mx = std::max(mx, v);
    }
    Vec p(s.size());
    double z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) z += (p[i] = std::exp(s[i] - mx));
    for (double& v : p) v /= z;
    return p;
}

Vec hardmax(const Vec& s) {
    need(!s.empty(), "hardmax: empty input");
    double mx = *std::max_element(s.begin(), s.end());
    std::size_t m = static_cast<std::size_t>(std::count(s.begin(), s.end(), mx));
    Vec p(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] == mx) p[i] = 1.0 / static_cast<double>(m);
    return p;
}

Vec relu(Vec x) {
    for (double& v : x) v = v > 0.0 ? v : 0.0;
    return x;
}

Vec rms_layernorm(const Vec& y, const Vec& gamma, const Vec& beta) {
    need(y.size() == gamma.size() && y.size() == beta.size(), "rms_layernorm: dimension mismatch");
    double ss = 0.0;
    for (double v : y) ss += v * v;
    if (ss == 0.0) return beta;
    double inv = 1.0 / std::sqrt(ss / static_cast<double>(y.size()));
    Vec out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = gamma[i] * inv * y[i] + beta[i];
    return out;
}

Vec layernorm(const Vec& y, const Vec& gamma, const Vec& beta) {
    need(y.size() == gamma.size() && y.size() == beta.size(), "layernorm: dimension mismatch");
    const double d = static_cast<double>(y.size());
    double mu = 0.0;
    for (double v : y) mu += v;
    mu /= d;
    double ss = 0.0;
    for (double v : y) ss += (v - mu) * (v - mu);
    if (ss == 0.0) return beta;
    double inv = 1.0 / std::sqrt(ss / d);
    Vec out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = gamma[i] * inv * (y[i] - mu) + beta[i];
    return out;
}

}  // namespace dyf
