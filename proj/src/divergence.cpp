#include "dann/divergence.hpp"

#include "dann/parallel.hpp"
#include "dann/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dann::divergence {

namespace {

void require_both_domains(const DomainLabeledSet& set, const char* what) {
    bool has[2] = {false, false};
    for (int d : set.domain) {
        if (d != 0 && d != 1) throw DivergenceError(std::string(what) + ": domain labels must be 0 or 1");
        has[d] = true;
    }
    if (!has[0] || !has[1]) throw DivergenceError(std::string(what) + ": both domains must be present");
}

std::vector<std::size_t> identity_order(std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    return order;
}

struct Halves {
    DomainLabeledSet train;
    DomainLabeledSet eval;
};

// The shuffle starts from norm order, which neither swapping the samples nor a
// shared orthogonal transform changes.
Halves split_halves(const DomainLabeledSet& U, std::uint64_t seed) {
    auto order = identity_order(U.size());
    std::vector<double> norm2(U.size());
    for (std::size_t i = 0; i < U.size(); ++i) norm2[i] = dot(U.x[i], U.x[i]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm2[a] < norm2[b]; });
    Rng rng = Rng::stream(seed, "pad-split");
    rng.shuffle(order);
    const std::size_t cut = U.size() / 2;
    Halves h;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < cut ? h.train : h.eval;
        dst.x.push_back(U.x[order[i]]);
        dst.domain.push_back(U.domain[order[i]]);
    }
    return h;
}

struct Errors {
    double source = 0.0;
    double target = 0.0;
    double overall = 0.0;
};

template <typename Model>
Errors score(const Model& model, const DomainLabeledSet& eval) {
    std::size_t wrong[2] = {0, 0}, count[2] = {0, 0};
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const int d = eval.domain[i];
        ++count[d];
        if (model.predict(eval.x[i]) != d) ++wrong[d];
    }
    Errors e;
    e.source = count[0] ? static_cast<double>(wrong[0]) / static_cast<double>(count[0]) : 0.0;
    e.target = count[1] ? static_cast<double>(wrong[1]) / static_cast<double>(count[1]) : 0.0;
    e.overall = static_cast<double>(wrong[0] + wrong[1]) / static_cast<double>(eval.size());
    return e;
}

std::vector<Errors> grid_errors(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr,
                                const PadOptions& options) {
    if (options.C_grid.empty()) throw DivergenceError("pad: empty C grid");
    for (double C : options.C_grid) {
        if (!(C > 0.0)) throw DivergenceError("pad: C values must be positive");
    }
    const auto U = build_U(source_repr, target_repr);
    if (U.size() < 4) throw DivergenceError("pad: need at least 4 samples");
    const auto halves = split_halves(U, options.seed);
    require_both_domains(halves.train, "pad (training half)");

    std::vector<Errors> out(options.C_grid.size());
    parallel_for(options.C_grid.size(), options.jobs, [&](std::size_t i) {
        const double C = options.C_grid[i];
        const std::uint64_t seed = Rng::stream(options.seed, "pad-sgd").next() + i;
        if (options.discriminator.kind == DiscriminatorKind::mlp) {
            out[i] = score(train_mlp_discriminator(halves.train, C, seed, options.discriminator), halves.eval);
        } else {
            out[i] = score(train_domain_classifier(halves.train, C, seed, options.discriminator), halves.eval);
        }
    });
    return out;
}

} // namespace

DomainLabeledSet build_U(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr) {
    if (source_repr.empty() || target_repr.empty()) throw DivergenceError("build_U: empty source or target sample");
    const std::size_t dim = source_repr.front().size();
    if (dim == 0) throw DivergenceError("build_U: zero-dimensional representation");
    DomainLabeledSet U;
    U.x.reserve(source_repr.size() + target_repr.size());
    for (int label = 0; label < 2; ++label) {
        for (const auto& v : label == 0 ? source_repr : target_repr) {
            if (v.size() != dim) {
                throw DivergenceError("build_U: dimension mismatch (" + std::to_string(v.size()) + " vs " +
                                      std::to_string(dim) + ")");
            }
            U.x.push_back(v);
            U.domain.push_back(label);
        }
    }
    return U;
}

double LinearClassifier::decision(std::span<const double> x) const {
    return dot(weights, x) + bias;
}

int LinearClassifier::predict(std::span<const double> x) const {
    return decision(x) > 0.0 ? 1 : 0;
}

LinearClassifier train_domain_classifier(const DomainLabeledSet& train, double C, std::uint64_t seed,
                                         const DiscriminatorConfig& config) {
    if (!(C > 0.0)) throw DivergenceError("train_domain_classifier: C must be positive");
    if (train.size() == 0) throw DivergenceError("train_domain_classifier: empty training set");
    require_both_domains(train, "train_domain_classifier");

    const double lambda = 1.0 / (C * static_cast<double>(train.size()));
    LinearClassifier clf;
    clf.weights.assign(train.dim(), 0.0);
    clf.reg_C = C;

    Rng rng(seed);
    auto order = identity_order(train.size());
    std::size_t t = 0;
    for (std::size_t pass = 0; pass < config.passes; ++pass) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            const double eta = config.step0 / (1.0 + config.step0 * lambda * static_cast<double>(t++));
            const double y = train.domain[i] == 1 ? 1.0 : -1.0;
            const double margin = y * clf.decision(train.x[i]);
            for (double& w : clf.weights) w *= 1.0 - eta * lambda;
            if (margin < 1.0) {
                axpy(eta * y, train.x[i], clf.weights);
                clf.bias += eta * y;
            }
        }
    }
    return clf;
}

double MlpClassifier::decision(std::span<const double> x) const {
    Vector a = matvec(W, x);
    axpy(1.0, b, a);
    return dot(v, sigm(a)) + c;
}

int MlpClassifier::predict(std::span<const double> x) const {
    return decision(x) > 0.0 ? 1 : 0;
}

MlpClassifier train_mlp_discriminator(const DomainLabeledSet& train, double C, std::uint64_t seed,
                                      const DiscriminatorConfig& config) {
    if (!(C > 0.0)) throw DivergenceError("train_mlp_discriminator: C must be positive");
    if (train.size() == 0) throw DivergenceError("train_mlp_discriminator: empty training set");
    if (config.hidden == 0) throw DivergenceError("train_mlp_discriminator: hidden size must be positive");
    require_both_domains(train, "train_mlp_discriminator");

    const std::size_t m = train.dim(), H = config.hidden;
    const double lambda = 1.0 / (C * static_cast<double>(train.size()));
    Rng rng(seed);
    MlpClassifier clf;
    clf.reg_C = C;
    clf.W = Matrix(H, m);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(m));
    for (double& w : clf.W.values()) w = rng.uniform(-w_bound, w_bound);
    clf.b.assign(H, 0.0);
    clf.v.resize(H);
    const double v_bound = 1.0 / std::sqrt(static_cast<double>(H));
    for (double& w : clf.v) w = rng.uniform(-v_bound, v_bound);

    auto order = identity_order(train.size());
    std::size_t t = 0;
    for (std::size_t pass = 0; pass < config.passes; ++pass) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            const double eta = config.step0 / (1.0 + config.step0 * lambda * static_cast<double>(t++));
            const auto& x = train.x[i];
            Vector a = matvec(clf.W, x);
            axpy(1.0, clf.b, a);
            const Vector h = sigm(a);
            const double p = sigm(dot(clf.v, h) + clf.c);
            const double g = p - static_cast<double>(train.domain[i]);
            Vector gh(H);
            for (std::size_t j = 0; j < H; ++j) gh[j] = g * clf.v[j] * h[j] * (1.0 - h[j]);
            for (std::size_t j = 0; j < H; ++j) clf.v[j] -= eta * (g * h[j] + lambda * clf.v[j]);
            clf.c -= eta * g;
            for (double& w : clf.W.values()) w *= 1.0 - eta * lambda;
            add_outer(clf.W, -eta, gh, x);
            axpy(-eta, gh, clf.b);
        }
    }
    return clf;
}

std::vector<double> default_C_grid() {
    std::vector<double> grid(10);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = std::pow(10.0, -5.0 + 5.0 * static_cast<double>(i) / 9.0);
    return grid;
}

double proxy_a_distance(double epsilon) {
    return 2.0 * (1.0 - 2.0 * epsilon);
}

PadReport pad(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr,
              const PadOptions& options) {
    const auto errors = grid_errors(source_repr, target_repr, options);
    PadReport report;
    report.epsilon = 0.5;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        report.grid.emplace_back(options.C_grid[i], errors[i].overall);
        report.epsilon = std::min(report.epsilon, errors[i].overall);
    }
    report.d_hat_A = proxy_a_distance(report.epsilon);
    return report;
}

double h_divergence_from_errors(double source_error, double target_error) {
    const double e = source_error + target_error;
    return std::min(e, 2.0 - e);
}

double empirical_h_divergence(const std::vector<Vector>& source_repr, const std::vector<Vector>& target_repr,
                              const PadOptions& options) {
    const auto errors = grid_errors(source_repr, target_repr, options);
    double best = 1.0;
    for (const auto& e : errors) best = std::min(best, h_divergence_from_errors(e.source, e.target));
    return 2.0 * (1.0 - best);
}

PcaResult pca_project(const std::vector<Vector>& points, std::size_t k) {
    if (points.size() < 2) throw DivergenceError("pca_project: need at least 2 points");
    const std::size_t d = points.front().size();
    if (k == 0 || k > d) {
        throw DivergenceError("pca_project: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(d) + "]");
    }
    for (const auto& p : points) {
        if (p.size() != d) throw DivergenceError("pca_project: points have different dimensions");
    }

    PcaResult r;
    r.mean.assign(d, 0.0);
    for (const auto& p : points) axpy(1.0, p, r.mean);
    for (double& v : r.mean) v /= static_cast<double>(points.size());

    Matrix cov(d, d);
    for (const auto& p : points) {
        Vector c = p;
        axpy(-1.0, r.mean, c);
        add_outer(cov, 1.0, c, c);
    }
    for (double& v : cov.values()) v /= static_cast<double>(points.size() - 1);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);

    const double tol = 1e-10;
    const std::size_t max_iter = 10000;
    double scale = 0.0;
    for (double v : cov.values()) scale = std::max(scale, std::abs(v));
    Matrix A = cov;
    Rng start(0x9ca);

    auto orthogonalize = [&](Vector& v) {
        for (const auto& c : r.components) axpy(-dot(c, v), c, v);
    };
    auto normalize = [](Vector& v) {
        const double n = std::sqrt(dot(v, v));
        if (n > 0.0) {
            for (double& x : v) x /= n;
        }
        return n;
    };

    for (std::size_t comp = 0; comp < k; ++comp) {
        Vector v(d);
        for (double& x : v) x = start.uniform(-1.0, 1.0);
        orthogonalize(v);
        normalize(v);
        bool null_space = false;
        for (std::size_t it = 0; it < max_iter; ++it) {
            Vector w = matvec(A, v);
            orthogonalize(w);
            const double rayleigh = dot(v, w);
            Vector residual = w;
            axpy(-rayleigh, v, residual);
            if (normalize(w) <= 1e-12 * scale) {
                null_space = true;
                break;
            }
            v = std::move(w);
            if (std::sqrt(dot(residual, residual)) <= tol * scale) break;
        }
        if (null_space) {
            // Remaining variance is zero: any unit vector orthogonal to the found axes will do.
            for (std::size_t e = 0; e < d; ++e) {
                Vector basis(d, 0.0);
                basis[e] = 1.0;
                orthogonalize(basis);
                orthogonalize(basis);
                if (normalize(basis) > 1e-6) {
                    v = std::move(basis);
                    break;
                }
            }
        }
        std::size_t lead = 0;
        for (std::size_t i = 1; i < d; ++i) {
            if (std::abs(v[i]) > std::abs(v[lead])) lead = i;
        }
        if (v[lead] < 0.0) {
            for (double& x : v) x = -x;
        }
        const double eigenvalue = std::max(0.0, dot(v, matvec(cov, v)));
        add_outer(A, -eigenvalue, v, v);
        r.components.push_back(v);
        r.explained_variance.push_back(eigenvalue);
        r.explained_variance_ratio.push_back(trace > 0.0 ? eigenvalue / trace : 0.0);
    }

    r.projected.reserve(points.size());
    for (const auto& p : points) {
        Vector c = p;
        axpy(-1.0, r.mean, c);
        Vector out(k);
        for (std::size_t j = 0; j < k; ++j) out[j] = dot(r.components[j], c);
        r.projected.push_back(std::move(out));
    }
    return r;
}

} // namespace dann::divergence
