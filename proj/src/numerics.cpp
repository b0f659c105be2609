#include "dann/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dann {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
}

} // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double sigm(double a) {
    // Split on sign so exp never overflows.
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

Vector sigm(std::span<const double> a) {
    Vector out(a.size());
    std::transform(a.begin(), a.end(), out.begin(), [](double v) { return sigm(v); });
    return out;
}

double log_sum_exp(std::span<const double> a) {
    if (a.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const double hi = *std::max_element(a.begin(), a.end());
    double sum = 0.0;
    for (double v : a) sum += std::exp(v - hi);
    return hi + std::log(sum);
}

Vector softmax(std::span<const double> a) {
    if (a.empty()) throw std::invalid_argument("softmax: empty input");
    const double hi = *std::max_element(a.begin(), a.end());
    Vector out(a.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::exp(a[i] - hi);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double nll_loss(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) {
        throw std::out_of_range("nll_loss: label " + std::to_string(label) + " out of range for " +
                                std::to_string(probs.size()) + " classes");
    }
    return -std::log(std::max(probs[label], kProbabilityFloor));
}

double bce_loss(double p, int d) {
    if (d == 1) return -std::log(std::max(p, kProbabilityFloor));
    return -std::log(std::max(1.0 - p, kProbabilityFloor));
}

Vector one_hot(std::size_t y, std::size_t num_classes) {
    if (y >= num_classes) {
        throw std::out_of_range("one_hot: class " + std::to_string(y) + " >= " + std::to_string(num_classes));
    }
    Vector out(num_classes, 0.0);
    out[y] = 1.0;
    return out;
}

Vector hadamard(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "hadamard");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
    if (x.size() != m.cols()) {
        throw std::invalid_argument("matvec: expected input of length " + std::to_string(m.cols()) + ", got " +
                                    std::to_string(x.size()));
    }
    Vector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
        out[r] = s;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> y) {
    if (y.size() != m.rows()) {
        throw std::invalid_argument("matvec_transposed: expected input of length " + std::to_string(m.rows()) +
                                    ", got " + std::to_string(y.size()));
    }
    Vector out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * y[r];
    }
    return out;
}

void add_outer(Matrix& m, double scale, std::span<const double> a, std::span<const double> b) {
    if (a.size() != m.rows() || b.size() != m.cols()) {
        throw std::invalid_argument("add_outer: shape mismatch");
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double s = scale * a[r];
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += s * b[c];
    }
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
    require_same_length(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

std::size_t argmax(std::span<const double> a) {
    if (a.empty()) throw std::invalid_argument("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i) {
        if (a[i] > a[best]) best = i;
    }
    return best;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

} // namespace dann
