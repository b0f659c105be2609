#pragma once

#include "dann/data.hpp"
#include "dann/numerics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace dann::shallow {

/// Parameters of the single-hidden-layer network.
///
///   features  h = sigm(W x + b)            W: D×m, b: D
///   labels    p = softmax(V h + c)         V: L×D, c: L
///   domain    g = sigm(uᵀ h + z)           u: D,   z: scalar
///
/// `g` is the domain regressor's probability that an example was drawn from
/// the source sample: the stochastic update pushes g up on source examples and
/// down on target examples, and an input is read as "source" when g ≥ 1/2.
struct ShallowParams {
    Matrix W;
    Vector b;
    Matrix V;
    Vector c;
    Vector u;
    double z = 0.0;

    std::size_t input_dim() const { return W.cols(); }
    std::size_t hidden_size() const { return W.rows(); }
    std::size_t num_classes() const { return V.rows(); }

    /// Throws std::invalid_argument on inconsistent block shapes.
    void validate() const;

    bool operator==(const ShallowParams&) const = default;
};

/// W, V uniform in ±1/√fan_in; b, c, u, z zero.
ShallowParams init_params(std::size_t input_dim, std::size_t hidden_size, std::size_t num_classes,
                          std::uint64_t seed);

struct EarlyStopping {
    std::size_t patience = 10;
    /// Held-out labeled examples; the validation risk is the error rate on them.
    std::vector<LabeledSample> validation;
};

struct ShallowConfig {
    std::size_t hidden_size = 15;
    double lambda = 1.0;
    double learning_rate = 0.05;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;
    /// false: the domain regressor still trains but nothing flows back into (W, b).
    bool adversarial = true;
    /// Reshuffle the source visiting order each epoch; off visits S in stored order.
    bool shuffle = false;
    std::optional<EarlyStopping> early_stopping;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double source_loss = 0.0;
    double domain_loss = 0.0;
    std::optional<double> validation_risk;
};

struct ShallowModel {
    ShallowParams params;
    ShallowConfig config;
    std::vector<EpochRecord> training_log;
};

/// Per-block deltas of one stochastic update, in the sign convention of the
/// update rule: the network blocks move by -μ·Δ and the domain regressor by +μ·Δ.
struct StepDeltas {
    Matrix dW;
    Vector db;
    Matrix dV;
    Vector dc;
    Vector du;
    double dz = 0.0;
};

Vector forward_features(std::span<const double> x, const ShallowParams& params);
Vector predict_label(std::span<const double> h, const ShallowParams& params);
double predict_domain(std::span<const double> h, const ShallowParams& params);

/// Mean source NLL minus λ times the summed per-domain mean domain losses.
double objective(const ShallowParams& params, const std::vector<LabeledSample>& source,
                 const std::vector<Vector>& target, double lambda);

StepDeltas step_deltas(const ShallowParams& params, const LabeledSample& source_sample,
                       std::span<const double> target_sample, double lambda, bool adversarial);

void apply_deltas(ShallowParams& params, const StepDeltas& deltas, double learning_rate);

/// One stochastic update on a (source, target) pair.
ShallowParams sgd_step(const ShallowParams& params, const LabeledSample& source_sample,
                       std::span<const double> target_sample, const ShallowConfig& config);

/// Called after every update with the 0-based step index and the new parameters.
using StepObserver = std::function<void(std::size_t step, const ShallowParams& params)>;

/// Runs epochs over S, pairing each source example with a target example drawn
/// uniformly with replacement. `initial` overrides the seeded initialization.
ShallowModel train(const DomainDataset& dataset, const ShallowConfig& config,
                   const std::optional<ShallowParams>& initial = std::nullopt,
                   const StepObserver& observer = {});

std::size_t predict_class(const ShallowParams& params, std::span<const double> x);
double evaluate(const ShallowParams& params, const std::vector<LabeledSample>& samples);
double evaluate(const ShallowModel& model, const std::vector<LabeledSample>& samples);

/// Hidden representations G_f(x) for a batch of inputs.
std::vector<Vector> hidden_representations(const ShallowParams& params, const std::vector<Vector>& xs);

} // namespace dann::shallow
