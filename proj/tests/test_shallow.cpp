#include "dann/shallow_dann.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace dann;
using namespace dann::shallow;

namespace {

ShallowParams random_params(Rng& rng, std::size_t m, std::size_t D, std::size_t L) {
    ShallowParams p = init_params(m, D, L, rng.next());
    for (auto& v : p.b) v = rng.uniform(-1, 1);
    for (auto& v : p.c) v = rng.uniform(-1, 1);
    for (auto& v : p.u) v = rng.uniform(-1, 1);
    p.z = rng.uniform(-1, 1);
    return p;
}

Vector random_vector(Rng& rng, std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = rng.uniform(-2, 2);
    return v;
}

// Flat views of the blocks so the finite-difference loop can perturb any entry.
std::vector<double*> block(ShallowParams& p, int which) {
    std::vector<double*> out;
    auto add = [&](std::vector<double>& v) {
        for (auto& x : v) out.push_back(&x);
    };
    switch (which) {
        case 0: add(p.W.values()); break;
        case 1: add(p.b); break;
        case 2: add(p.V.values()); break;
        case 3: add(p.c); break;
        case 4: add(p.u); break;
        default: out.push_back(&p.z);
    }
    return out;
}

Vector delta_block(const StepDeltas& d, int which) {
    switch (which) {
        case 0: return d.dW.values();
        case 1: return d.db;
        case 2: return d.dV.values();
        case 3: return d.dc;
        case 4: return d.du;
        default: return {d.dz};
    }
}

double norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

DomainDataset small_task(std::uint64_t seed) {
    MoonsTaskOptions o;
    o.n_source_per_class = 20;
    o.n_target = 40;
    o.seed = seed;
    return make_moons_task(o);
}

} // namespace

TEST_CASE("feature forward examples") {
    ShallowParams p = init_params(2, 3, 2, 1);
    p.W = Matrix(3, 2);
    CHECK(forward_features(Vector{0.7, -1.2}, p) == Vector{0.5, 0.5, 0.5});

    ShallowParams q = init_params(3, 3, 2, 1);
    q.W = Matrix::identity(3);
    CHECK(forward_features(Vector{0, 0, 0}, q) == Vector{0.5, 0.5, 0.5});

    ShallowParams r = init_params(1, 1, 2, 1);
    r.W(0, 0) = std::log(3.0);
    CHECK(std::abs(forward_features(Vector{1.0}, r)[0] - 0.75) <= 1e-12);

    CHECK_THROWS(forward_features(Vector{1.0, 2.0}, r));
}

TEST_CASE("label forward examples") {
    ShallowParams p = init_params(2, 4, 3, 1);
    p.V = Matrix(3, 4);
    const auto probs = predict_label(Vector{0.1, 0.2, 0.3, 0.4}, p);
    for (double v : probs) CHECK(std::abs(v - 1.0 / 3.0) <= 1e-12);

    ShallowParams q = init_params(2, 2, 2, 1);
    q.V = Matrix(2, 2);
    q.c = {0.0, 10.0};
    const auto pq = predict_label(Vector{0.3, 0.9}, q);
    CHECK(std::abs(pq[0] - 4.5397868702434395e-05) <= 1e-15);
    CHECK(std::abs(pq[1] - 0.9999546021312976) <= 1e-12);
    CHECK_THROWS(predict_label(Vector{0.3}, q));
}

TEST_CASE("domain forward examples") {
    ShallowParams p = init_params(2, 3, 2, 1);
    CHECK(predict_domain(Vector{0.2, 0.4, 0.6}, p) == 0.5);
    p.z = std::log(3.0);
    CHECK(std::abs(predict_domain(Vector{0.2, 0.4, 0.6}, p) - 0.75) <= 1e-12);
    CHECK_THROWS(predict_domain(Vector{0.2}, p));
}

TEST_CASE("init params shapes and ranges") {
    const auto p = init_params(3, 5, 4, 9);
    CHECK_NOTHROW(p.validate());
    CHECK(p.input_dim() == 3);
    CHECK(p.hidden_size() == 5);
    CHECK(p.num_classes() == 4);
    for (double w : p.W.values()) CHECK(std::abs(w) <= 1.0 / std::sqrt(3.0));
    for (double v : p.V.values()) CHECK(std::abs(v) <= 1.0 / std::sqrt(5.0));
    CHECK(p.b == Vector(5, 0.0));
    CHECK(p.u == Vector(5, 0.0));
    CHECK(p.z == 0.0);
    CHECK(init_params(3, 5, 4, 9) == p);
}

TEST_CASE("objective closed forms") {
    Rng rng(2);
    auto p = random_params(rng, 2, 4, 2);
    const std::vector<LabeledSample> S{{{0.3, -0.2}, 0}, {{1.1, 0.4}, 1}};
    const std::vector<Vector> T{{0.5, 0.5}, {-1.0, 0.2}, {0.0, 0.0}};
    double nll = 0.0;
    for (const auto& s : S) nll += nll_loss(predict_label(forward_features(s.x, p), p), s.y);
    CHECK(objective(p, S, T, 0.0) == nll / 2.0);

    p.V = Matrix(2, 4);
    p.c = {0.0, 800.0};
    p.u = Vector(4, 0.0);
    p.z = 0.0;
    const std::vector<LabeledSample> ones{{{0.3, -0.2}, 1}, {{1.1, 0.4}, 1}};
    const double lambda = 1.7;
    CHECK(std::abs(objective(p, ones, T, lambda) + 2.0 * lambda * std::log(2.0)) <= 1e-12);

    CHECK_THROWS(objective(p, {}, T, 1.0));
    CHECK_THROWS(objective(p, ones, {}, 1.0));
}

TEST_CASE("step deltas match finite differences of the objective") {
    Rng rng(20240);
    const double h = 1e-5;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 1 + rng.index(5), D = 1 + rng.index(8), L = 2 + rng.index(3);
        auto p = random_params(rng, m, D, L);
        const LabeledSample s{random_vector(rng, m), rng.index(L)};
        const Vector t = random_vector(rng, m);
        const double lambda = rng.uniform(0.1, 5.0);
        const auto d = step_deltas(p, s, t, lambda, true);
        for (int which = 0; which < 6; ++which) {
            const Vector analytic = delta_block(d, which);
            auto entries = block(p, which);
            Vector numeric(entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const double keep = *entries[i];
                *entries[i] = keep + h;
                const double up = objective(p, {s}, {t}, lambda);
                *entries[i] = keep - h;
                const double down = objective(p, {s}, {t}, lambda);
                *entries[i] = keep;
                numeric[i] = (up - down) / (2 * h);
            }
            Vector diff(analytic.size());
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
            const double scale = std::max({norm(analytic), norm(numeric), 1e-8});
            CHECK(norm(diff) / scale <= 1e-5);
        }
    }
}

TEST_CASE("adversarial deltas are linear in lambda") {
    Rng rng(31);
    auto p = random_params(rng, 3, 5, 3);
    const LabeledSample s{random_vector(rng, 3), 2};
    const Vector t = random_vector(rng, 3);
    const auto d0 = step_deltas(p, s, t, 0.0, true);
    const auto d1 = step_deltas(p, s, t, 1.5, true);
    const auto d2 = step_deltas(p, s, t, 3.0, true);
    for (int which = 0; which < 6; ++which) {
        const auto a = delta_block(d0, which), b = delta_block(d1, which), c = delta_block(d2, which);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs((c[i] - a[i]) - 2.0 * (b[i] - a[i])) <= 1e-12);
        }
    }
    CHECK(d0.du == Vector(5, 0.0));
    CHECK(d0.dz == 0.0);
}

TEST_CASE("zero lambda reduces to supervised backprop") {
    Rng rng(32);
    auto p = random_params(rng, 3, 4, 2);
    const LabeledSample s{random_vector(rng, 3), 1};
    const Vector t = random_vector(rng, 3);
    const auto adv = step_deltas(p, s, t, 0.0, true);
    const auto nn = step_deltas(p, s, t, 0.0, false);
    CHECK(adv.dW == nn.dW);
    CHECK(adv.db == nn.db);
    CHECK(adv.dV == nn.dV);
    CHECK(adv.dc == nn.dc);

    const auto h = forward_features(s.x, p);
    auto grad_c = predict_label(h, p);
    grad_c[s.y] -= 1.0;
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(adv.dc[k] - grad_c[k]) <= 1e-15);
}

TEST_CASE("non-adversarial mode keeps the domain regressor training") {
    Rng rng(33);
    auto p = random_params(rng, 2, 3, 2);
    const LabeledSample s{random_vector(rng, 2), 0};
    const Vector t = random_vector(rng, 2);
    const auto adv = step_deltas(p, s, t, 2.0, true);
    const auto nn = step_deltas(p, s, t, 2.0, false);
    const auto sup = step_deltas(p, s, t, 0.0, true);
    CHECK(nn.du == adv.du);
    CHECK(nn.dz == adv.dz);
    CHECK(nn.dW == sup.dW);
    CHECK(nn.db == sup.db);
    CHECK_FALSE(adv.dW == sup.dW);
}

TEST_CASE("apply deltas moves network blocks down and the domain regressor up") {
    Rng rng(34);
    auto p = random_params(rng, 2, 3, 2);
    const LabeledSample s{random_vector(rng, 2), 0};
    const Vector t = random_vector(rng, 2);
    ShallowConfig cfg;
    cfg.lambda = 1.0;
    cfg.learning_rate = 0.1;
    const auto d = step_deltas(p, s, t, cfg.lambda, true);
    const auto next = sgd_step(p, s, t, cfg);
    CHECK(next.W(0, 0) == p.W(0, 0) - 0.1 * d.dW(0, 0));
    CHECK(next.c[1] == p.c[1] - 0.1 * d.dc[1]);
    CHECK(next.u[2] == p.u[2] + 0.1 * d.du[2]);
    CHECK(next.z == p.z + 0.1 * d.dz);
}

TEST_CASE("training is deterministic") {
    const auto task = small_task(1);
    ShallowConfig cfg;
    cfg.hidden_size = 5;
    cfg.max_epochs = 5;
    cfg.seed = 7;
    const auto a = train(task, cfg);
    const auto b = train(task, cfg);
    CHECK(a.params == b.params);
    CHECK(a.training_log.size() == 5);
    cfg.seed = 8;
    CHECK_FALSE(train(task, cfg).params == a.params);
}

TEST_CASE("zero lambda and non-adversarial trajectories coincide") {
    const auto task = small_task(2);
    ShallowConfig cfg;
    cfg.hidden_size = 6;
    cfg.max_epochs = 3;
    cfg.lambda = 0.0;
    std::vector<ShallowParams> a, b;
    train(task, cfg, std::nullopt, [&](std::size_t, const ShallowParams& p) { a.push_back(p); });
    cfg.lambda = 6.0;
    cfg.adversarial = false;
    train(task, cfg, std::nullopt, [&](std::size_t, const ShallowParams& p) { b.push_back(p); });
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() == 3 * task.source.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].W == b[i].W);
        CHECK(a[i].b == b[i].b);
        CHECK(a[i].V == b[i].V);
        CHECK(a[i].c == b[i].c);
    }
}

TEST_CASE("early stopping halts and restores the best validation model") {
    const auto task = small_task(3);
    ShallowConfig cfg;
    cfg.hidden_size = 4;
    cfg.max_epochs = 400;
    cfg.early_stopping = EarlyStopping{2, task.source};
    const auto m = train(task, cfg);
    CHECK(m.training_log.size() < 400);
    double best = 1.0;
    for (const auto& r : m.training_log) {
        REQUIRE(r.validation_risk.has_value());
        best = std::min(best, *r.validation_risk);
    }
    CHECK(std::abs((1.0 - evaluate(m.params, task.source)) - best) <= 1e-12);
}

TEST_CASE("training rejects an invalid dataset") {
    DomainDataset d;
    CHECK_THROWS_AS(train(d, ShallowConfig{}), DataError);
}

TEST_CASE("evaluate examples") {
    ShallowParams p = init_params(1, 2, 2, 0);
    p.V = Matrix(2, 2);
    p.c = {0.0, 0.0};
    const std::vector<LabeledSample> balanced{{{0.1}, 0}, {{0.2}, 1}, {{0.3}, 1}, {{0.4}, 0}, {{0.5}, 0}};
    CHECK(evaluate(p, balanced) == doctest::Approx(0.6));

    p.c = {5.0, 0.0};
    CHECK(evaluate(p, {{{0.1}, 0}, {{2.0}, 0}}) == 1.0);
    CHECK(evaluate(p, {{{0.1}, 1}}) == 0.0);
}

TEST_CASE("hidden representations") {
    const auto p = init_params(2, 3, 2, 5);
    const std::vector<Vector> xs{{0.1, 0.2}, {-1.0, 3.0}};
    const auto h = hidden_representations(p, xs);
    REQUIRE(h.size() == 2);
    CHECK(h[1] == forward_features(xs[1], p));
}
