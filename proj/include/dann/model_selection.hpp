#pragma once

#include "dann/data.hpp"
#include "dann/shallow_dann.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dann::selection {

struct SelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A trained predictor.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual std::size_t predict(std::span<const double> x) const = 0;
};

/// Error rate of `clf` on `samples`.
double risk(const Classifier& clf, const std::vector<LabeledSample>& samples);

struct TrainRequest {
    const std::vector<LabeledSample>& source;
    const std::vector<Vector>& target;
    /// Labeled held-out examples for early stopping.
    const std::vector<LabeledSample>& validation;
    /// Model to start from (the forward model when training the reverse one).
    std::shared_ptr<const Classifier> initial;
    std::uint64_t seed = 0;
    /// 0: infer from the labels present.
    std::size_t num_classes = 0;
};

using TrainFn = std::function<std::shared_ptr<const Classifier>(const TrainRequest&)>;

struct Candidate {
    double lambda = 0.0;
    std::size_t hidden_size = 15;
    double learning_rate = 1e-3;

    bool operator==(const Candidate&) const = default;
};

class ShallowClassifier : public Classifier {
public:
    explicit ShallowClassifier(shallow::ShallowModel model) : model_(std::move(model)) {}
    std::size_t predict(std::span<const double> x) const override;
    const shallow::ShallowModel& model() const { return model_; }

private:
    shallow::ShallowModel model_;
};

/// Trains shallow DANN with the candidate's λ, hidden size and learning rate on
/// top of `base` (epochs, patience, seed offset). Warm-starts from `initial`
/// when it is a ShallowClassifier of matching shape.
TrainFn shallow_trainer(const Candidate& candidate, const shallow::ShallowConfig& base = {},
                        std::size_t patience = 10);

/// Which original indices went where; S_V never reaches a trainer as labeled data.
struct DataFlow {
    std::vector<std::size_t> source_train;
    std::vector<std::size_t> source_validation;
    std::vector<std::size_t> target_train;
    std::vector<std::size_t> target_validation;
};

struct ReverseValidationResult {
    Candidate config;
    /// Error of the reverse model on S_V.
    double risk = 0.0;
    std::shared_ptr<const Classifier> forward_model;
    std::shared_ptr<const Classifier> reverse_model;
    DataFlow flow;
};

/// 90/10 splits of S and T; forward model on (S′, T′) stopped on S_V; reverse
/// model on η-labeled T′ against S′ features, stopped on η-labeled T_V and
/// started from η. Throws SelectionError when |S| or |T| is below 10.
ReverseValidationResult reverse_validation_risk(const TrainFn& train_fn, const std::vector<LabeledSample>& source,
                                                const std::vector<Vector>& target, std::uint64_t split_seed);

struct HyperGrid {
    std::vector<double> lambdas;
    std::vector<std::size_t> hidden_sizes;
    std::vector<double> learning_rates;

    /// Cartesian product in (λ, hidden size, learning rate) order.
    std::vector<Candidate> candidates() const;
};

/// λ: nine log-spaced values in [1e-2, 1] plus 0; hidden sizes {50, 100}; learning rate 1e-3.
HyperGrid default_grid();

using TrainerFactory = std::function<TrainFn(const Candidate&)>;

struct GridEntry {
    Candidate config;
    double risk = 0.0;
    std::vector<double> repeat_risks;
    std::size_t insertion_index = 0;
};

struct GridSearchOptions {
    std::size_t repeats = 1;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

/// Split seed used by repeat r.
std::uint64_t repeat_split_seed(std::uint64_t seed, std::size_t repeat);

/// Mean reverse-validation risk per candidate over `repeats` splits, sorted by
/// (risk, λ, hidden size, insertion order). Every candidate sees the same splits.
std::vector<GridEntry> grid_search(const std::vector<Candidate>& candidates, const std::vector<LabeledSample>& source,
                                   const std::vector<Vector>& target, const TrainerFactory& factory,
                                   const GridSearchOptions& options = {});

} // namespace dann::selection
