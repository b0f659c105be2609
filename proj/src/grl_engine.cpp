#include "dann/grl_engine.hpp"

#include "dann/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dann::grl {

namespace {

Vector activate(Activation a, const Vector& z) {
    switch (a) {
    case Activation::logistic:
        return sigm(z);
    case Activation::relu: {
        Vector out(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
        return out;
    }
    case Activation::softmax:
        return softmax(z);
    case Activation::identity:
        return z;
    }
    return z;
}

// dL/dz from dL/do for one layer.
Vector activation_backward(Activation a, const Vector& z, const Vector& o, const Vector& g_out) {
    Vector g(z.size());
    switch (a) {
    case Activation::logistic:
        for (std::size_t i = 0; i < z.size(); ++i) g[i] = g_out[i] * o[i] * (1.0 - o[i]);
        break;
    case Activation::relu:
        // Subgradient 0 at z = 0.
        for (std::size_t i = 0; i < z.size(); ++i) g[i] = z[i] > 0.0 ? g_out[i] : 0.0;
        break;
    case Activation::softmax: {
        const double s = dot(o, g_out);
        for (std::size_t i = 0; i < z.size(); ++i) g[i] = o[i] * (g_out[i] - s);
        break;
    }
    case Activation::identity:
        g = g_out;
        break;
    }
    return g;
}

struct StackTrace {
    std::vector<Vector> inputs;
    std::vector<Vector> pre;
    std::vector<Vector> outputs;

    const Vector& output() const { return outputs.back(); }
};

StackTrace run_stack(const std::vector<DenseLayer>& stack, std::span<const double> x) {
    StackTrace t;
    Vector current(x.begin(), x.end());
    for (const auto& layer : stack) {
        Vector z = matvec(layer.W, current);
        axpy(1.0, layer.b, z);
        Vector o = activate(layer.spec.activation, z);
        t.inputs.push_back(std::move(current));
        t.pre.push_back(std::move(z));
        current = o;
        t.outputs.push_back(std::move(o));
    }
    return t;
}

// Backpropagates starting from the gradient w.r.t. the pre-activation of the last
// layer. Parameter gradients are accumulated into `grads` scaled by `param_scale`;
// returns dL/d(stack input).
Vector backprop_stack(const std::vector<DenseLayer>& stack, const StackTrace& trace, Vector g_pre_last,
                      std::vector<DenseLayer>& grads, double param_scale) {
    Vector g_pre = std::move(g_pre_last);
    for (std::size_t k = stack.size(); k-- > 0;) {
        add_outer(grads[k].W, param_scale, g_pre, trace.inputs[k]);
        axpy(param_scale, g_pre, grads[k].b);
        Vector g_in = matvec_transposed(stack[k].W, g_pre);
        if (k == 0) return g_in;
        g_pre = activation_backward(stack[k - 1].spec.activation, trace.pre[k - 1], trace.outputs[k - 1], g_in);
    }
    return {};
}

// Backpropagates a gradient w.r.t. the stack output.
Vector backprop_stack_from_output(const std::vector<DenseLayer>& stack, const StackTrace& trace, const Vector& g_out,
                                  std::vector<DenseLayer>& grads, double param_scale) {
    const auto& last = stack.back();
    Vector g_pre = activation_backward(last.spec.activation, trace.pre.back(), trace.outputs.back(), g_out);
    return backprop_stack(stack, trace, std::move(g_pre), grads, param_scale);
}

std::vector<DenseLayer> build_stack(std::size_t in_dim, const StackSpec& spec, Rng& rng) {
    std::vector<DenseLayer> out;
    for (const auto& [width, act] : spec.layers) {
        if (width == 0) throw std::invalid_argument("build_graph: zero-width layer");
        DenseLayer layer;
        layer.spec = {in_dim, width, act};
        layer.W = Matrix(width, in_dim);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& v : layer.W.values()) v = rng.uniform(-bound, bound);
        layer.b.assign(width, 0.0);
        out.push_back(std::move(layer));
        in_dim = width;
    }
    return out;
}

void check_chain(const std::vector<DenseLayer>& stack, std::size_t in_dim, const char* name) {
    if (stack.empty()) throw std::invalid_argument(std::string(name) + " is empty");
    for (const auto& layer : stack) {
        const auto& s = layer.spec;
        if (s.in_dim != in_dim || s.out_dim == 0 || layer.W.rows() != s.out_dim || layer.W.cols() != s.in_dim ||
            layer.b.size() != s.out_dim) {
            throw std::invalid_argument(std::string(name) + ": layer shapes do not chain");
        }
        in_dim = s.out_dim;
    }
}

void scale_graph(LayerGraph& g, double s) {
    for (auto* stack : {&g.feature_stack, &g.label_head, &g.domain_head}) {
        for (auto& layer : *stack) {
            for (double& v : layer.W.values()) v *= s;
            for (double& v : layer.b) v *= s;
        }
    }
}

// dst += s · src, blockwise.
void add_scaled(LayerGraph& dst, const LayerGraph& src, double s) {
    auto add_stack = [s](std::vector<DenseLayer>& d, const std::vector<DenseLayer>& o) {
        for (std::size_t k = 0; k < d.size(); ++k) {
            axpy(s, o[k].W.values(), d[k].W.values());
            axpy(s, o[k].b, d[k].b);
        }
    };
    add_stack(dst.feature_stack, src.feature_stack);
    add_stack(dst.label_head, src.label_head);
    add_stack(dst.domain_head, src.domain_head);
}

void apply_gradient(LayerGraph& graph, const LayerGraph& grad, double mu_p, MomentumState* momentum) {
    if (momentum && momentum->coefficient != 0.0) {
        if (!momentum->velocity) momentum->velocity = zeros_like(graph);
        scale_graph(*momentum->velocity, momentum->coefficient);
        add_scaled(*momentum->velocity, grad, -mu_p);
        add_scaled(graph, *momentum->velocity, 1.0);
    } else {
        add_scaled(graph, grad, -mu_p);
    }
}

// Hidden layers only; the output layer is fixed by the head's role.
std::size_t depth_width(const std::vector<DenseLayer>& stack) {
    if (stack.empty()) return 0;
    std::size_t width = 0;
    for (std::size_t i = 0; i + 1 < stack.size(); ++i) width = std::max(width, stack[i].spec.out_dim);
    return (stack.size() - 1) * width;
}

} // namespace

std::string to_string(Activation a) {
    switch (a) {
    case Activation::logistic:
        return "logistic";
    case Activation::relu:
        return "relu";
    case Activation::softmax:
        return "softmax";
    case Activation::identity:
        return "identity";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "logistic" || name == "sigmoid") return Activation::logistic;
    if (name == "relu") return Activation::relu;
    if (name == "softmax") return Activation::softmax;
    if (name == "identity" || name == "linear") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t LayerGraph::input_dim() const {
    return feature_stack.empty() ? 0 : feature_stack.front().spec.in_dim;
}

std::size_t LayerGraph::feature_dim() const {
    return feature_stack.empty() ? 0 : feature_stack.back().spec.out_dim;
}

std::size_t LayerGraph::num_classes() const {
    return label_head.empty() ? 0 : label_head.back().spec.out_dim;
}

void LayerGraph::validate() const {
    check_chain(feature_stack, input_dim(), "feature stack");
    if (input_dim() == 0) throw std::invalid_argument("feature stack has zero input dimension");
    check_chain(label_head, feature_dim(), "label head");
    check_chain(domain_head, feature_dim(), "domain head");
    if (label_head.back().spec.activation != Activation::softmax) {
        throw std::invalid_argument("label head must end in a softmax layer");
    }
    const auto& last = domain_head.back().spec;
    if (last.activation != Activation::logistic || last.out_dim != 1) {
        throw std::invalid_argument("domain head must end in a single logistic unit");
    }
}

Architecture shallow_architecture(std::size_t input_dim, std::size_t hidden_size, std::size_t num_classes) {
    Architecture a;
    a.input_dim = input_dim;
    a.feature.layers = {{hidden_size, Activation::logistic}};
    a.label.layers = {{num_classes, Activation::softmax}};
    a.domain.layers = {{1, Activation::logistic}};
    return a;
}

LayerGraph build_graph(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0) throw std::invalid_argument("build_graph: zero input dimension");
    Rng rng(seed);
    LayerGraph g;
    g.feature_stack = build_stack(arch.input_dim, arch.feature, rng);
    if (g.feature_stack.empty()) throw std::invalid_argument("build_graph: empty feature stack");
    g.label_head = build_stack(g.feature_dim(), arch.label, rng);
    g.domain_head = build_stack(g.feature_dim(), arch.domain, rng);
    g.validate();
    return g;
}

LayerGraph zeros_like(const LayerGraph& graph) {
    LayerGraph z = graph;
    scale_graph(z, 0.0);
    z.grl_coefficient = 0.0;
    return z;
}

LayerGraph from_shallow(const shallow::ShallowParams& p) {
    p.validate();
    LayerGraph g;
    const std::size_t m = p.input_dim(), D = p.hidden_size(), L = p.num_classes();
    g.feature_stack.push_back({{m, D, Activation::logistic}, p.W, p.b});
    g.label_head.push_back({{D, L, Activation::softmax}, p.V, p.c});
    Matrix u(1, D);
    std::copy(p.u.begin(), p.u.end(), u.values().begin());
    g.domain_head.push_back({{D, 1, Activation::logistic}, std::move(u), Vector{p.z}});
    return g;
}

shallow::ShallowParams to_shallow(const LayerGraph& g) {
    g.validate();
    if (g.feature_stack.size() != 1 || g.label_head.size() != 1 || g.domain_head.size() != 1 ||
        g.feature_stack.front().spec.activation != Activation::logistic) {
        throw std::invalid_argument("to_shallow: graph is not a single logistic hidden layer network");
    }
    shallow::ShallowParams p;
    p.W = g.feature_stack.front().W;
    p.b = g.feature_stack.front().b;
    p.V = g.label_head.front().W;
    p.c = g.label_head.front().b;
    p.u = g.domain_head.front().W.values();
    p.z = g.domain_head.front().b.front();
    return p;
}

std::vector<std::string> capacity_warnings(const LayerGraph& graph) {
    std::vector<std::string> out;
    const auto label = depth_width(graph.label_head);
    const auto domain = depth_width(graph.domain_head);
    if (domain < label) {
        out.push_back("domain head capacity (depth x width = " + std::to_string(domain) +
                      ") is below the label head's (" + std::to_string(label) +
                      "); the domain classifier may not cover the label hypothesis class");
    }
    return out;
}

Vector grl_forward(std::span<const double> x) {
    return Vector(x.begin(), x.end());
}

Vector grl_backward(std::span<const double> upstream, double coefficient) {
    Vector out(upstream.size());
    for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = -coefficient * upstream[i];
    return out;
}

ForwardResult forward(const LayerGraph& graph, std::span<const double> x) {
    if (x.size() != graph.input_dim()) {
        throw std::invalid_argument("forward: expected input of dimension " + std::to_string(graph.input_dim()) +
                                    ", got " + std::to_string(x.size()));
    }
    ForwardResult r;
    r.feature = run_stack(graph.feature_stack, x).output();
    r.label_probs = run_stack(graph.label_head, r.feature).output();
    r.domain_prob = run_stack(graph.domain_head, grl_forward(r.feature)).output().front();
    return r;
}

Vector features(const LayerGraph& graph, std::span<const double> x) {
    if (x.size() != graph.input_dim()) throw std::invalid_argument("features: input dimension mismatch");
    return run_stack(graph.feature_stack, x).output();
}

std::size_t predict_class(const LayerGraph& graph, std::span<const double> x) {
    return argmax(forward(graph, x).label_probs);
}

double evaluate(const LayerGraph& graph, const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("evaluate: empty sample");
    std::size_t correct = 0;
    for (const auto& s : samples) {
        if (predict_class(graph, s.x) == s.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

BatchGradient batch_gradient(const LayerGraph& graph, const Batch& batch, double lambda_p, double domain_weight) {
    if (batch.source_half.empty() || batch.target_half.empty()) {
        throw std::invalid_argument("batch_gradient: both batch halves must be nonempty");
    }
    BatchGradient out{zeros_like(graph), 0.0, 0.0};
    const double inv_s = 1.0 / static_cast<double>(batch.source_half.size());
    const double inv_t = 1.0 / static_cast<double>(batch.target_half.size());

    auto domain_pass = [&](const StackTrace& feat, int domain_label, double scale) {
        const auto dom = run_stack(graph.domain_head, grl_forward(feat.output()));
        const double g = dom.output().front();
        out.domain_loss += scale * bce_loss(g, domain_label);
        // Logistic output with cross-entropy: dL/dz = g - d.
        Vector g_pre{scale * (g - static_cast<double>(domain_label))};
        Vector g_feat = backprop_stack(graph.domain_head, dom, std::move(g_pre), out.grad.domain_head, domain_weight);
        return grl_backward(g_feat, lambda_p);
    };

    for (const auto& s : batch.source_half) {
        if (s.x.size() != graph.input_dim()) throw std::invalid_argument("batch_gradient: input dimension mismatch");
        const auto feat = run_stack(graph.feature_stack, s.x);
        const auto lab = run_stack(graph.label_head, feat.output());
        const Vector& probs = lab.output();
        out.label_loss += inv_s * nll_loss(probs, s.y);
        // Softmax output with NLL: dL/dz = p - e(y).
        Vector g_pre = probs;
        g_pre[s.y] -= 1.0;
        for (double& v : g_pre) v *= inv_s;
        Vector g_feat = backprop_stack(graph.label_head, lab, std::move(g_pre), out.grad.label_head, 1.0);
        axpy(1.0, domain_pass(feat, 1, inv_s), g_feat);
        backprop_stack_from_output(graph.feature_stack, feat, g_feat, out.grad.feature_stack, 1.0);
    }
    for (const auto& x : batch.target_half) {
        if (x.size() != graph.input_dim()) throw std::invalid_argument("batch_gradient: input dimension mismatch");
        const auto feat = run_stack(graph.feature_stack, x);
        const Vector g_feat = domain_pass(feat, 0, inv_t);
        backprop_stack_from_output(graph.feature_stack, feat, g_feat, out.grad.feature_stack, 1.0);
    }
    return out;
}

double pseudo_objective(const LayerGraph& graph, const Batch& batch, double lambda) {
    if (batch.source_half.empty() || batch.target_half.empty()) {
        throw std::invalid_argument("pseudo_objective: both batch halves must be nonempty");
    }
    double label = 0.0, dom_s = 0.0, dom_t = 0.0;
    for (const auto& s : batch.source_half) {
        const auto r = forward(graph, s.x);
        label += nll_loss(r.label_probs, s.y);
        dom_s += bce_loss(r.domain_prob, 1);
    }
    for (const auto& x : batch.target_half) dom_t += bce_loss(forward(graph, x).domain_prob, 0);
    const double ns = static_cast<double>(batch.source_half.size());
    const double nt = static_cast<double>(batch.target_half.size());
    return label / ns - lambda * (dom_s / ns + dom_t / nt);
}

LayerGraph backward_and_update(const LayerGraph& graph, const Batch& batch, double mu_p, double lambda_p,
                               double domain_weight, MomentumState* momentum) {
    const auto g = batch_gradient(graph, batch, lambda_p, domain_weight);
    LayerGraph next = graph;
    apply_gradient(next, g.grad, mu_p, momentum);
    next.grl_coefficient = lambda_p;
    return next;
}

double lr_schedule(double p, const Schedule& s) {
    p = std::clamp(p, 0.0, 1.0);
    return s.mu0 / std::pow(1.0 + s.alpha * p, s.beta);
}

double lambda_schedule(double p, const Schedule& s) {
    p = std::clamp(p, 0.0, 1.0);
    return 2.0 / (1.0 + std::exp(-s.gamma * p)) - 1.0;
}

DeepResult train_deep(const LayerGraph& graph, const DomainDataset& dataset, const DeepConfig& config,
                      const GraphObserver& observer) {
    graph.validate();
    dataset.validate();
    if (graph.input_dim() != dataset.feature_dim || graph.num_classes() != dataset.num_classes) {
        throw std::invalid_argument("train_deep: graph does not match dataset dimensions");
    }
    if (config.batch_size < 2 || config.batch_size % 2 != 0) {
        throw std::invalid_argument("train_deep: batch size must be even and at least 2");
    }

    DeepResult result{graph, {}};
    const std::size_t half = config.batch_size / 2;
    const std::size_t n = dataset.source.size();
    const std::size_t n_target = dataset.target.size();
    const std::size_t iters_per_epoch = (n + half - 1) / half;
    const std::size_t total_iters = config.epochs * iters_per_epoch;

    Rng shuffler = Rng::stream(config.seed, "shuffle");
    Rng target_draw = Rng::stream(config.seed, "target-draw");
    Rng target_order_rng = Rng::stream(config.seed, "target-order");
    Rng padding = Rng::stream(config.seed, "pad");
    MomentumState momentum{config.momentum, std::nullopt};

    std::vector<std::size_t> source_order(n), target_order(n_target);
    for (std::size_t i = 0; i < n; ++i) source_order[i] = i;
    for (std::size_t i = 0; i < n_target; ++i) target_order[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) shuffler.shuffle(source_order);
        if (config.target_sampling == TargetSampling::sweep) target_order_rng.shuffle(target_order);
        std::size_t source_pos = 0, target_pos = 0;
        DeepEpochRecord record;
        record.epoch = epoch + 1;

        for (std::size_t it = 0; it < iters_per_epoch; ++it) {
            Batch batch;
            for (std::size_t k = 0; k < half; ++k) {
                const std::size_t si = source_pos < n ? source_order[source_pos++] : padding.index(n);
                batch.source_half.push_back(dataset.source[si]);
                std::size_t ti;
                if (config.target_sampling == TargetSampling::uniform) {
                    ti = target_draw.index(n_target);
                } else {
                    ti = target_pos < n_target ? target_order[target_pos++] : padding.index(n_target);
                }
                batch.target_half.push_back(dataset.target[ti]);
            }

            const double p = total_iters == 0 ? 0.0 : static_cast<double>(step) / static_cast<double>(total_iters);
            const double mu_p = lr_schedule(p, config.schedule);
            const double lambda_p = config.fixed_lambda ? *config.fixed_lambda : lambda_schedule(p, config.schedule);
            const double reversal = config.adversarial ? lambda_p : 0.0;
            const double domain_weight = config.domain_weight_follows_lambda ? lambda_p : 1.0;

            const auto g = batch_gradient(result.graph, batch, reversal, domain_weight);
            record.label_loss += g.label_loss;
            record.domain_loss += g.domain_loss;
            apply_gradient(result.graph, g.grad, mu_p, &momentum);
            result.graph.grl_coefficient = reversal;
            record.mu_p = mu_p;
            record.lambda_p = lambda_p;
            if (observer) observer(step, result.graph);
            ++step;
        }
        record.label_loss /= static_cast<double>(iters_per_epoch);
        record.domain_loss /= static_cast<double>(iters_per_epoch);
        result.log.push_back(record);
    }
    return result;
}

} // namespace dann::grl
