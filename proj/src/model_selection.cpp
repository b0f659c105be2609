#include "dann/model_selection.hpp"

#include "dann/parallel.hpp"
#include "dann/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dann::selection {

namespace {

std::vector<std::size_t> indices(std::size_t n) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

std::vector<LabeledSample> self_label(const Classifier& clf, const std::vector<Vector>& xs) {
    std::vector<LabeledSample> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back({x, clf.predict(x)});
    return out;
}

} // namespace

double risk(const Classifier& clf, const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw SelectionError("risk: empty sample");
    std::size_t wrong = 0;
    for (const auto& s : samples) {
        if (clf.predict(s.x) != s.y) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

std::size_t ShallowClassifier::predict(std::span<const double> x) const {
    return shallow::predict_class(model_.params, x);
}

TrainFn shallow_trainer(const Candidate& candidate, const shallow::ShallowConfig& base, std::size_t patience) {
    return [candidate, base, patience](const TrainRequest& req) -> std::shared_ptr<const Classifier> {
        shallow::ShallowConfig config = base;
        config.lambda = candidate.lambda;
        config.hidden_size = candidate.hidden_size;
        config.learning_rate = candidate.learning_rate;
        config.seed = req.seed;
        if (!req.validation.empty()) config.early_stopping = shallow::EarlyStopping{patience, req.validation};

        DomainDataset data;
        data.source = req.source;
        data.target = req.target;
        data.feature_dim = req.source.empty() ? 0 : req.source.front().x.size();
        std::size_t classes = req.num_classes;
        for (const auto& s : req.source) classes = std::max(classes, s.y + 1);
        for (const auto& s : req.validation) classes = std::max(classes, s.y + 1);

        std::optional<shallow::ShallowParams> initial;
        if (const auto* warm = dynamic_cast<const ShallowClassifier*>(req.initial.get())) {
            const auto& p = warm->model().params;
            if (p.input_dim() == data.feature_dim && p.num_classes() >= classes) {
                initial = p;
                classes = p.num_classes();
            }
        }
        data.num_classes = std::max<std::size_t>(classes, 2);
        return std::make_shared<ShallowClassifier>(shallow::train(data, config, initial));
    };
}

ReverseValidationResult reverse_validation_risk(const TrainFn& train_fn, const std::vector<LabeledSample>& source,
                                                const std::vector<Vector>& target, std::uint64_t split_seed) {
    if (source.size() < 10 || target.size() < 10) {
        throw SelectionError("reverse validation needs at least 10 source and 10 target examples (got " +
                             std::to_string(source.size()) + " and " + std::to_string(target.size()) + ")");
    }
    ReverseValidationResult result;
    try {
        const auto s_split = split(indices(source.size()), {0.9, Rng::stream(split_seed, "rv-source").next()});
        const auto t_split = split(indices(target.size()), {0.9, Rng::stream(split_seed, "rv-target").next()});
        result.flow = {s_split.first, s_split.second, t_split.first, t_split.second};
    } catch (const DataError& e) {
        throw SelectionError(std::string("reverse validation: degenerate split: ") + e.what());
    }

    const auto s_prime = pick(source, result.flow.source_train);
    const auto s_val = pick(source, result.flow.source_validation);
    const auto t_prime = pick(target, result.flow.target_train);
    const auto t_val = pick(target, result.flow.target_validation);

    const std::size_t classes = count_classes(source);
    result.forward_model = train_fn({s_prime, t_prime, s_val, nullptr, split_seed, classes});
    if (!result.forward_model) throw SelectionError("reverse validation: trainer returned no model");

    const auto t_prime_labeled = self_label(*result.forward_model, t_prime);
    const auto t_val_labeled = self_label(*result.forward_model, t_val);
    const auto s_prime_features = features_of(s_prime);
    result.reverse_model =
        train_fn({t_prime_labeled, s_prime_features, t_val_labeled, result.forward_model, split_seed, classes});
    if (!result.reverse_model) throw SelectionError("reverse validation: trainer returned no model");

    result.risk = risk(*result.reverse_model, s_val);
    return result;
}

std::vector<Candidate> HyperGrid::candidates() const {
    std::vector<Candidate> out;
    for (double l : lambdas) {
        for (std::size_t h : hidden_sizes) {
            for (double mu : learning_rates) out.push_back({l, h, mu});
        }
    }
    return out;
}

HyperGrid default_grid() {
    HyperGrid g;
    g.lambdas.push_back(0.0);
    for (int i = 0; i < 9; ++i) g.lambdas.push_back(std::pow(10.0, -2.0 + 2.0 * i / 8.0));
    g.hidden_sizes = {50, 100};
    g.learning_rates = {1e-3};
    return g;
}

std::uint64_t repeat_split_seed(std::uint64_t seed, std::size_t repeat) {
    return splitmix64(seed + 0x9e3779b97f4a7c15ULL * (repeat + 1));
}

std::vector<GridEntry> grid_search(const std::vector<Candidate>& candidates, const std::vector<LabeledSample>& source,
                                   const std::vector<Vector>& target, const TrainerFactory& factory,
                                   const GridSearchOptions& options) {
    if (candidates.empty()) return {};
    if (options.repeats == 0) throw SelectionError("grid search: repeats must be positive");

    const std::size_t jobs_total = candidates.size() * options.repeats;
    std::vector<double> risks(jobs_total);
    parallel_for(jobs_total, options.jobs, [&](std::size_t job) {
        const std::size_t c = job / options.repeats, r = job % options.repeats;
        const auto fn = factory(candidates[c]);
        risks[job] = reverse_validation_risk(fn, source, target, repeat_split_seed(options.seed, r)).risk;
    });

    std::vector<GridEntry> out;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        GridEntry e;
        e.config = candidates[c];
        e.insertion_index = c;
        e.repeat_risks.assign(risks.begin() + static_cast<std::ptrdiff_t>(c * options.repeats),
                              risks.begin() + static_cast<std::ptrdiff_t>((c + 1) * options.repeats));
        double sum = 0.0;
        for (double v : e.repeat_risks) sum += v;
        e.risk = sum / static_cast<double>(options.repeats);
        out.push_back(std::move(e));
    }
    std::stable_sort(out.begin(), out.end(), [](const GridEntry& a, const GridEntry& b) {
        if (a.risk != b.risk) return a.risk < b.risk;
        if (a.config.lambda != b.config.lambda) return a.config.lambda < b.config.lambda;
        if (a.config.hidden_size != b.config.hidden_size) return a.config.hidden_size < b.config.hidden_size;
        return a.insertion_index < b.insertion_index;
    });
    return out;
}

} // namespace dann::selection
