#pragma once

#include "dann/data.hpp"
#include "dann/numerics.hpp"
#include "dann/shallow_dann.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dann::grl {

enum class Activation { logistic, relu, softmax, identity };

std::string to_string(Activation a);
/// Throws std::invalid_argument for unknown names.
Activation activation_from_string(const std::string& name);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::logistic;

    bool operator==(const LayerSpec&) const = default;
};

struct DenseLayer {
    LayerSpec spec;
    Matrix W; // out_dim × in_dim
    Vector b; // out_dim

    bool operator==(const DenseLayer&) const = default;
};

/// Feature extractor feeding a label head (ending in softmax) and, through the
/// gradient reversal junction, a domain head (ending in one logistic unit that
/// gives the probability of the source domain).
struct LayerGraph {
    std::vector<DenseLayer> feature_stack;
    std::vector<DenseLayer> label_head;
    std::vector<DenseLayer> domain_head;
    /// Coefficient applied at the reversal junction by the most recent update.
    double grl_coefficient = 0.0;

    std::size_t input_dim() const;
    std::size_t feature_dim() const;
    std::size_t num_classes() const;

    /// Throws std::invalid_argument when the stacks do not chain or the heads end wrongly.
    void validate() const;

    bool operator==(const LayerGraph&) const = default;
};

/// Output width and activation of each layer in a stack.
struct StackSpec {
    std::vector<std::pair<std::size_t, Activation>> layers;
};

struct Architecture {
    std::size_t input_dim = 0;
    StackSpec feature;
    StackSpec label;
    StackSpec domain;
};

/// One logistic hidden layer, softmax label head, logistic domain head.
Architecture shallow_architecture(std::size_t input_dim, std::size_t hidden_size, std::size_t num_classes);

/// Weights uniform in ±1/√fan_in, biases zero.
LayerGraph build_graph(const Architecture& arch, std::uint64_t seed);
/// Same shapes as `graph`, every parameter zero.
LayerGraph zeros_like(const LayerGraph& graph);

LayerGraph from_shallow(const shallow::ShallowParams& params);
/// Throws std::invalid_argument unless the graph has the single-hidden-layer shape.
shallow::ShallowParams to_shallow(const LayerGraph& graph);

/// Heuristic check that the domain head is at least as expressive as the label
/// head (hidden depth × widest hidden layer). Returns human-readable warnings; empty when satisfied.
std::vector<std::string> capacity_warnings(const LayerGraph& graph);

/// Identity.
Vector grl_forward(std::span<const double> x);
/// -coefficient · upstream.
Vector grl_backward(std::span<const double> upstream, double coefficient);

struct ForwardResult {
    Vector label_probs;
    double domain_prob = 0.5;
    Vector feature;
};

ForwardResult forward(const LayerGraph& graph, std::span<const double> x);
Vector features(const LayerGraph& graph, std::span<const double> x);
std::size_t predict_class(const LayerGraph& graph, std::span<const double> x);
double evaluate(const LayerGraph& graph, const std::vector<LabeledSample>& samples);

struct Batch {
    std::vector<LabeledSample> source_half;
    std::vector<Vector> target_half;
};

/// Gradient of the pseudo-objective on one batch. Label loss is averaged over
/// the source half; domain loss is the source-half mean plus the target-half
/// mean. Domain-head gradients are scaled by `domain_weight`; the feature
/// stack receives the domain gradient through the reversal junction with
/// coefficient `lambda_p`. All returned blocks are descent directions.
struct BatchGradient {
    LayerGraph grad;
    double label_loss = 0.0;
    double domain_loss = 0.0;
};

BatchGradient batch_gradient(const LayerGraph& graph, const Batch& batch, double lambda_p, double domain_weight);

/// Pseudo-objective value with the reversal junction treated as identity:
/// mean label loss - λ · (source mean + target mean of the domain loss).
double pseudo_objective(const LayerGraph& graph, const Batch& batch, double lambda);

struct MomentumState {
    double coefficient = 0.9;
    std::optional<LayerGraph> velocity;
};

/// One SGD step. With momentum: v ← m·v − μ·g, θ ← θ + v.
LayerGraph backward_and_update(const LayerGraph& graph, const Batch& batch, double mu_p, double lambda_p,
                               double domain_weight = 1.0, MomentumState* momentum = nullptr);

struct Schedule {
    double mu0 = 0.01;
    double alpha = 10.0;
    double beta = 0.75;
    double gamma = 10.0;
};

/// μ0 / (1 + α·p)^β with p clamped to [0, 1].
double lr_schedule(double p, const Schedule& s);
/// 2 / (1 + exp(-γ·p)) − 1 with p clamped to [0, 1].
double lambda_schedule(double p, const Schedule& s);

enum class TargetSampling {
    /// Shuffled pass over T each epoch, resampling uniformly once exhausted.
    sweep,
    /// Every target slot drawn uniformly with replacement.
    uniform,
};

struct DeepConfig {
    Schedule schedule;
    /// Even; half source, half target.
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double momentum = 0.9;
    /// Constant λ instead of the progress schedule.
    std::optional<double> fixed_lambda;
    /// Scale domain-head gradients by λ_p (shallow update rule) instead of 1.
    bool domain_weight_follows_lambda = false;
    /// false: reversal coefficient forced to 0; the domain head still trains.
    bool adversarial = true;
    bool shuffle = true;
    TargetSampling target_sampling = TargetSampling::sweep;
};

struct DeepEpochRecord {
    std::size_t epoch = 0;
    double label_loss = 0.0;
    double domain_loss = 0.0;
    double mu_p = 0.0;
    double lambda_p = 0.0;

    bool operator==(const DeepEpochRecord&) const = default;
};

struct DeepResult {
    LayerGraph graph;
    std::vector<DeepEpochRecord> log;
};

using GraphObserver = std::function<void(std::size_t step, const LayerGraph& graph)>;

/// Iterations per epoch: ⌈n / (batch_size/2)⌉; progress p = completed / total iterations.
DeepResult train_deep(const LayerGraph& graph, const DomainDataset& dataset, const DeepConfig& config,
                      const GraphObserver& observer = {});

} // namespace dann::grl
