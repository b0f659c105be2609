#pragma once

#include "dann/numerics.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dann::divergence {

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Points tagged with their domain: 0 for source, 1 for target.
struct DomainLabeledSet {
    std::vector<Vector> x;
    std::vector<int> domain;

    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
};

/// Throws DivergenceError when either side is empty or the dimensions disagree.
DomainLabeledSet build_U(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr);

struct LinearClassifier {
    Vector weights;
    double bias = 0.0;
    double reg_C = 1.0;

    double decision(std::span<const double> x) const;
    /// 1 (target) when the decision value is positive, else 0.
    int predict(std::span<const double> x) const;
};

enum class DiscriminatorKind { linear, mlp };

struct DiscriminatorConfig {
    DiscriminatorKind kind = DiscriminatorKind::linear;
    /// Passes over the training half.
    std::size_t passes = 50;
    /// Initial step size of the SGD schedule η_t = η0 / (1 + η0·λ·t).
    double step0 = 0.1;
    /// Hidden units of the mlp variant.
    std::size_t hidden = 16;
};

/// Linear model minimizing λ/2·‖w‖² + mean hinge loss with λ = 1/(C·N) by seeded SGD.
/// Throws DivergenceError unless both domains are present.
LinearClassifier train_domain_classifier(const DomainLabeledSet& train, double C, std::uint64_t seed,
                                         const DiscriminatorConfig& config = {});

/// One logistic hidden layer and a logistic output unit.
struct MlpClassifier {
    Matrix W;
    Vector b;
    Vector v;
    double c = 0.0;
    double reg_C = 1.0;

    /// Log-odds of the target domain.
    double decision(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
};

/// Logistic loss with L2 penalty λ = 1/(C·N) on the weights, seeded SGD.
MlpClassifier train_mlp_discriminator(const DomainLabeledSet& train, double C, std::uint64_t seed,
                                      const DiscriminatorConfig& config = {});

/// 10 log-spaced values in [1e-5, 1].
std::vector<double> default_C_grid();

struct PadOptions {
    std::vector<double> C_grid = default_C_grid();
    std::uint64_t seed = 0;
    DiscriminatorConfig discriminator;
    std::size_t jobs = 1;
};

struct PadReport {
    double epsilon = 0.5;
    double d_hat_A = 0.0;
    /// (C, error on the evaluation half) per grid point, in grid order.
    std::vector<std::pair<double, double>> grid;
};

/// 2(1 − 2ε).
double proxy_a_distance(double epsilon);

/// Trains one discriminator per C on a seeded half of U and scores it on the
/// other half (which receives the extra sample when |U| is odd). ε is the
/// lowest evaluation error, capped at 0.5.
PadReport pad(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr,
              const PadOptions& options = {});

/// 2(1 − e) where e = min(err_s + err_t, 2 − err_s − err_t) is the smallest
/// sum of class-conditional errors on the evaluation half over the C grid.
double empirical_h_divergence(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr,
                              const PadOptions& options = {});

/// The bracketed term for given class-conditional error rates, folded by label flip.
double h_divergence_from_errors(double source_error, double target_error);

struct PcaResult {
    std::vector<Vector> projected;
    /// Unit-norm principal axes, largest variance first.
    std::vector<Vector> components;
    std::vector<double> explained_variance;
    std::vector<double> explained_variance_ratio;
    Vector mean;
};

/// Top-k principal components of the sample covariance by deflated power iteration.
/// Throws DivergenceError when k is 0 or exceeds the dimension, or with fewer than 2 points.
PcaResult pca_project(const std::vector<Vector>& points, std::size_t k);

} // namespace dann::divergence
