#include "dann/shallow_dann.hpp"

#include "dann/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dann::shallow {

namespace {

void require_length(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) {
        throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                                    std::to_string(v.size()));
    }
}

// h ⊙ (1 - h)
Vector logistic_slope(const Vector& h) {
    Vector out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * (1.0 - h[i]);
    return out;
}

struct StepLosses {
    double label = 0.0;
    double domain = 0.0;
};

StepDeltas compute_step(const ShallowParams& params, const LabeledSample& source_sample,
                        std::span<const double> target_sample, double lambda, bool adversarial,
                        StepLosses* losses) {
    const auto& xs = source_sample.x;

    // Forward propagation on the source example.
    const Vector hs = forward_features(xs, params);
    const Vector probs = predict_label(hs, params);

    StepDeltas d;
    // Label branch.
    d.dc = probs;
    d.dc[source_sample.y] -= 1.0;
    d.dV = Matrix(params.V.rows(), params.V.cols());
    add_outer(d.dV, 1.0, d.dc, hs);
    const Vector slope_s = logistic_slope(hs);
    d.db = hadamard(matvec_transposed(params.V, d.dc), slope_s);
    d.dW = Matrix(params.W.rows(), params.W.cols());
    add_outer(d.dW, 1.0, d.db, xs);

    // Domain regressor on the source example.
    const double gs = predict_domain(hs, params);
    const double source_weight = lambda * (1.0 - gs);
    d.dz = source_weight;
    d.du = hs;
    for (double& v : d.du) v *= source_weight;
    if (adversarial) {
        Vector tmp = hadamard(params.u, slope_s);
        for (double& v : tmp) v *= source_weight;
        axpy(1.0, tmp, d.db);
        add_outer(d.dW, 1.0, tmp, xs);
    }

    // Domain regressor on the paired target example.
    const Vector ht = forward_features(target_sample, params);
    const double gt = predict_domain(ht, params);
    const double target_weight = -lambda * gt;
    d.dz += target_weight;
    axpy(target_weight, ht, d.du);
    if (adversarial) {
        Vector tmp = hadamard(params.u, logistic_slope(ht));
        for (double& v : tmp) v *= target_weight;
        axpy(1.0, tmp, d.db);
        add_outer(d.dW, 1.0, tmp, target_sample);
    }

    if (losses) {
        losses->label = nll_loss(probs, source_sample.y);
        losses->domain = bce_loss(gs, 1) + bce_loss(gt, 0);
    }
    return d;
}

} // namespace

void ShallowParams::validate() const {
    const std::size_t D = W.rows();
    const std::size_t L = V.rows();
    if (D == 0 || W.cols() == 0 || L == 0) throw std::invalid_argument("ShallowParams: empty block");
    if (b.size() != D || V.cols() != D || c.size() != L || u.size() != D) {
        throw std::invalid_argument("ShallowParams: inconsistent block shapes");
    }
}

ShallowParams init_params(std::size_t input_dim, std::size_t hidden_size, std::size_t num_classes,
                          std::uint64_t seed) {
    if (input_dim == 0 || hidden_size == 0 || num_classes == 0) {
        throw std::invalid_argument("init_params: dimensions must be positive");
    }
    Rng rng(seed);
    ShallowParams p;
    p.W = Matrix(hidden_size, input_dim);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (double& v : p.W.values()) v = rng.uniform(-w_bound, w_bound);
    p.V = Matrix(num_classes, hidden_size);
    const double v_bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    for (double& v : p.V.values()) v = rng.uniform(-v_bound, v_bound);
    p.b.assign(hidden_size, 0.0);
    p.c.assign(num_classes, 0.0);
    p.u.assign(hidden_size, 0.0);
    p.z = 0.0;
    return p;
}

Vector forward_features(std::span<const double> x, const ShallowParams& params) {
    require_length(x, params.input_dim(), "forward_features");
    Vector a = matvec(params.W, x);
    axpy(1.0, params.b, a);
    return sigm(a);
}

Vector predict_label(std::span<const double> h, const ShallowParams& params) {
    require_length(h, params.hidden_size(), "predict_label");
    Vector a = matvec(params.V, h);
    axpy(1.0, params.c, a);
    return softmax(a);
}

double predict_domain(std::span<const double> h, const ShallowParams& params) {
    require_length(h, params.hidden_size(), "predict_domain");
    return sigm(dot(params.u, h) + params.z);
}

double objective(const ShallowParams& params, const std::vector<LabeledSample>& source,
                 const std::vector<Vector>& target, double lambda) {
    if (source.empty() || target.empty()) throw std::invalid_argument("objective: empty source or target sample");
    double label_loss = 0.0;
    double source_domain_loss = 0.0;
    for (const auto& s : source) {
        const Vector h = forward_features(s.x, params);
        label_loss += nll_loss(predict_label(h, params), s.y);
        source_domain_loss += bce_loss(predict_domain(h, params), 1);
    }
    double target_domain_loss = 0.0;
    for (const auto& x : target) {
        target_domain_loss += bce_loss(predict_domain(forward_features(x, params), params), 0);
    }
    const double n = static_cast<double>(source.size());
    const double n_target = static_cast<double>(target.size());
    return label_loss / n - lambda * (source_domain_loss / n + target_domain_loss / n_target);
}

StepDeltas step_deltas(const ShallowParams& params, const LabeledSample& source_sample,
                       std::span<const double> target_sample, double lambda, bool adversarial) {
    if (source_sample.y >= params.num_classes()) throw std::invalid_argument("step_deltas: label out of range");
    return compute_step(params, source_sample, target_sample, lambda, adversarial, nullptr);
}

void apply_deltas(ShallowParams& params, const StepDeltas& d, double learning_rate) {
    // Descent on the network, ascent on the domain regressor.
    axpy(-learning_rate, d.dW.values(), params.W.values());
    axpy(-learning_rate, d.dV.values(), params.V.values());
    axpy(-learning_rate, d.db, params.b);
    axpy(-learning_rate, d.dc, params.c);
    axpy(learning_rate, d.du, params.u);
    params.z += learning_rate * d.dz;
}

ShallowParams sgd_step(const ShallowParams& params, const LabeledSample& source_sample,
                       std::span<const double> target_sample, const ShallowConfig& config) {
    ShallowParams next = params;
    apply_deltas(next, step_deltas(params, source_sample, target_sample, config.lambda, config.adversarial),
                 config.learning_rate);
    return next;
}

ShallowModel train(const DomainDataset& dataset, const ShallowConfig& config,
                   const std::optional<ShallowParams>& initial, const StepObserver& observer) {
    dataset.validate();
    if (config.hidden_size == 0) throw std::invalid_argument("train: hidden size must be positive");
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");

    ShallowModel model;
    model.config = config;
    if (initial) {
        initial->validate();
        if (initial->input_dim() != dataset.feature_dim || initial->num_classes() != dataset.num_classes) {
            throw std::invalid_argument("train: initial parameters do not match the dataset dimensions");
        }
        model.params = *initial;
    } else {
        model.params = init_params(dataset.feature_dim, config.hidden_size, dataset.num_classes,
                                   Rng::stream(config.seed, "init").next());
    }

    Rng target_draw = Rng::stream(config.seed, "target-draw");
    Rng shuffler = Rng::stream(config.seed, "shuffle");
    std::vector<std::size_t> order(dataset.source.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    ShallowParams best = model.params;
    double best_risk = 2.0;
    std::size_t since_best = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        if (config.shuffle) shuffler.shuffle(order);
        double label_sum = 0.0;
        double domain_sum = 0.0;
        for (std::size_t i : order) {
            const auto& target = dataset.target[target_draw.index(dataset.target.size())];
            StepLosses losses;
            const StepDeltas d = compute_step(model.params, dataset.source[i], target, config.lambda,
                                              config.adversarial, &losses);
            apply_deltas(model.params, d, config.learning_rate);
            label_sum += losses.label;
            domain_sum += losses.domain;
            if (observer) observer(step, model.params);
            ++step;
        }
        EpochRecord record;
        record.epoch = epoch + 1;
        record.source_loss = label_sum / static_cast<double>(order.size());
        record.domain_loss = domain_sum / static_cast<double>(order.size());

        if (config.early_stopping && !config.early_stopping->validation.empty()) {
            const double risk = 1.0 - evaluate(model.params, config.early_stopping->validation);
            record.validation_risk = risk;
            model.training_log.push_back(record);
            if (risk < best_risk) {
                best_risk = risk;
                best = model.params;
                since_best = 0;
            } else if (++since_best >= config.early_stopping->patience) {
                break;
            }
        } else {
            model.training_log.push_back(record);
        }
    }
    if (config.early_stopping && !config.early_stopping->validation.empty()) model.params = best;
    return model;
}

std::size_t predict_class(const ShallowParams& params, std::span<const double> x) {
    return argmax(predict_label(forward_features(x, params), params));
}

double evaluate(const ShallowParams& params, const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty sample");
    std::size_t correct = 0;
    for (const auto& s : samples) {
        if (predict_class(params, s.x) == s.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double evaluate(const ShallowModel& model, const std::vector<LabeledSample>& samples) {
    return evaluate(model.params, samples);
}

std::vector<Vector> hidden_representations(const ShallowParams& params, const std::vector<Vector>& xs) {
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(forward_features(x, params));
    return out;
}

} // namespace dann::shallow
