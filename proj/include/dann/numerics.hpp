#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dann {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    static Matrix identity(std::size_t n);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Activations and losses.

Vector sigm(std::span<const double> a);
double sigm(double a);
Vector softmax(std::span<const double> a);
double log_sum_exp(std::span<const double> a);

/// Lower bound applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-300;

/// -ln(probs[label]); throws std::out_of_range for a bad label.
double nll_loss(std::span<const double> probs, std::size_t label);

/// Binary cross-entropy of probability p against a 0/1 target.
double bce_loss(double p, int d);

Vector one_hot(std::size_t y, std::size_t num_classes);

// Elementwise and linear-algebra kernels. Length mismatches throw
// std::invalid_argument.

Vector hadamard(std::span<const double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
Vector matvec(const Matrix& m, std::span<const double> x);
/// mᵀ·y
Vector matvec_transposed(const Matrix& m, std::span<const double> y);
/// m += scale · a·bᵀ
void add_outer(Matrix& m, double scale, std::span<const double> a, std::span<const double> b);
/// y += scale · x
void axpy(double scale, std::span<const double> x, std::span<double> y);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> a);

bool all_finite(std::span<const double> a);

} // namespace dann
