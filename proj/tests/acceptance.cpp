// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero on any failure.
#include "dann/cli.hpp"
#include "dann/data.hpp"
#include "dann/divergence.hpp"
#include "dann/grl_engine.hpp"
#include "dann/io.hpp"
#include "dann/model_selection.hpp"
#include "dann/shallow_dann.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace dann;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.precision(digits);
    s << std::fixed << v;
    return s.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector random_vector(Rng& rng, std::size_t n, double scale) {
    Vector v(n);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return v;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_param_diff(const shallow::ShallowParams& a, const shallow::ShallowParams& b) {
    return std::max({max_abs_diff(a.W.values(), b.W.values()), max_abs_diff(a.b, b.b),
                     max_abs_diff(a.V.values(), b.V.values()), max_abs_diff(a.c, b.c), max_abs_diff(a.u, b.u),
                     std::abs(a.z - b.z)});
}

shallow::ShallowConfig moons_config(std::uint64_t seed, bool adversarial) {
    shallow::ShallowConfig c;
    c.hidden_size = 15;
    c.lambda = 6.0;
    c.learning_rate = 0.07;
    c.max_epochs = 200;
    c.seed = seed;
    c.adversarial = adversarial;
    return c;
}

DomainDataset moons_task(std::uint64_t seed) {
    MoonsTaskOptions o;
    o.seed = seed;
    return make_moons_task(o);
}

// 1. Step deltas against central differences of the objective.
Outcome gradient_audit() {
    Rng rng(1001);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.index(5), D = 1 + rng.index(8), L = 2 + rng.index(3);
        auto p = shallow::init_params(m, D, L, rng.next());
        for (auto& v : p.b) v = rng.uniform(-1, 1);
        for (auto& v : p.c) v = rng.uniform(-1, 1);
        for (auto& v : p.u) v = rng.uniform(-1, 1);
        p.z = rng.uniform(-1, 1);
        const LabeledSample s{random_vector(rng, m, 2.0), rng.index(L)};
        const Vector t = random_vector(rng, m, 2.0);
        const double lambda = rng.uniform(0.1, 6.0);
        const auto d = shallow::step_deltas(p, s, t, lambda, true);

        auto check_block = [&](std::vector<double*> entries, const Vector& analytic) {
            double diff = 0.0, na = 0.0, nn = 0.0;
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const double keep = *entries[i];
                *entries[i] = keep + h;
                const double up = shallow::objective(p, {s}, {t}, lambda);
                *entries[i] = keep - h;
                const double down = shallow::objective(p, {s}, {t}, lambda);
                *entries[i] = keep;
                const double numeric = (up - down) / (2 * h);
                diff += (numeric - analytic[i]) * (numeric - analytic[i]);
                na += analytic[i] * analytic[i];
                nn += numeric * numeric;
            }
            worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8}));
        };
        auto ptrs = [](std::vector<double>& v) {
            std::vector<double*> out;
            for (auto& x : v) out.push_back(&x);
            return out;
        };
        check_block(ptrs(p.W.values()), d.dW.values());
        check_block(ptrs(p.b), d.db);
        check_block(ptrs(p.V.values()), d.dV.values());
        check_block(ptrs(p.c), d.dc);
        check_block(ptrs(p.u), d.du);
        check_block({&p.z}, {d.dz});
    }
    return {worst <= 1e-5, "worst block relative error " + sci(worst)};
}

// 2. Reversal layer contract.
Outcome grl_contract() {
    Rng rng(2002);
    std::size_t bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto v = random_vector(rng, 1 + rng.index(32), 1e3);
        const double lambda = rng.uniform(0.0, 5.0);
        const auto f = grl::grl_forward(v);
        if (f.size() != v.size() || std::memcmp(f.data(), v.data(), v.size() * sizeof(double)) != 0) ++bad;
        const auto b = grl::grl_backward(v, lambda);
        for (std::size_t k = 0; k < v.size(); ++k) bad += b[k] != -lambda * v[k];
    }
    return {bad == 0, std::to_string(bad) + " mismatches over 1000 vectors"};
}

// 3. Shallow and layered engines on identical init and sample order.
Outcome cross_engine() {
    const auto task = moons_task(3);
    auto sc = moons_config(3, true);
    sc.max_epochs = 1;
    std::vector<shallow::ShallowParams> a;
    shallow::train(task, sc, std::nullopt, [&](std::size_t step, const shallow::ShallowParams& p) {
        if (step < 100) a.push_back(p);
    });

    grl::DeepConfig dc;
    dc.batch_size = 2;
    dc.epochs = 1;
    dc.seed = 3;
    dc.momentum = 0.0;
    dc.schedule.mu0 = sc.learning_rate;
    dc.schedule.alpha = 0.0;
    dc.fixed_lambda = sc.lambda;
    dc.domain_weight_follows_lambda = true;
    dc.shuffle = false;
    dc.target_sampling = grl::TargetSampling::uniform;
    const auto init = shallow::init_params(2, 15, 2, Rng::stream(3, "init").next());
    std::vector<shallow::ShallowParams> b;
    grl::train_deep(grl::from_shallow(init), task, dc, [&](std::size_t step, const grl::LayerGraph& g) {
        if (step < 100) b.push_back(grl::to_shallow(g));
    });
    if (a.size() != 100 || b.size() != 100) return {false, "trajectory too short"};
    double worst = 0.0;
    for (std::size_t i = 0; i < 100; ++i) worst = std::max(worst, max_param_diff(a[i], b[i]));
    return {worst <= 1e-10, "max parameter gap over 100 steps " + sci(worst)};
}

// 4. λ = 0 against the non-adversarial baseline.
Outcome ablation_identity() {
    const auto task = moons_task(4);
    auto c = moons_config(4, true);
    c.max_epochs = 20;
    c.lambda = 0.0;
    std::vector<shallow::ShallowParams> a, b;
    shallow::train(task, c, std::nullopt, [&](std::size_t, const shallow::ShallowParams& p) { a.push_back(p); });
    c.lambda = 6.0;
    c.adversarial = false;
    shallow::train(task, c, std::nullopt, [&](std::size_t, const shallow::ShallowParams& p) { b.push_back(p); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) {
        same = a[i].W == b[i].W && a[i].b == b[i].b && a[i].V == b[i].V && a[i].c == b[i].c;
    }
    return {same, std::to_string(a.size()) + " steps compared"};
}

// 5. Moons adaptation over 10 seeds.
Outcome moons_adaptation() {
    std::vector<double> nn_source, nn_target, dann_target;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto task = moons_task(seed);
        const auto truth = labeled_target(task);
        const auto nn = shallow::train(task, moons_config(seed, false));
        const auto dn = shallow::train(task, moons_config(seed, true));
        nn_source.push_back(shallow::evaluate(nn, task.source));
        nn_target.push_back(shallow::evaluate(nn, truth));
        dann_target.push_back(shallow::evaluate(dn, truth));
    }
    const double ns = median(nn_source), nt = median(nn_target), dt = median(dann_target);
    return {ns >= 0.95 && dt >= 0.90 && dt - nt >= 0.05,
            "median NN source " + fmt(ns) + ", NN target " + fmt(nt) + ", DANN target " + fmt(dt)};
}

// 6. PAD on raw inputs and hidden representations.
Outcome pad_behavior() {
    std::vector<double> raw, nn, dn;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto task = moons_task(seed);
        const auto S = features_of(task.source);
        divergence::PadOptions o;
        o.seed = seed;
        const auto nn_model = shallow::train(task, moons_config(seed, false));
        const auto dn_model = shallow::train(task, moons_config(seed, true));
        raw.push_back(divergence::pad(S, task.target, o).d_hat_A);
        nn.push_back(divergence::pad(shallow::hidden_representations(nn_model.params, S),
                                     shallow::hidden_representations(nn_model.params, task.target), o)
                         .d_hat_A);
        dn.push_back(divergence::pad(shallow::hidden_representations(dn_model.params, S),
                                     shallow::hidden_representations(dn_model.params, task.target), o)
                         .d_hat_A);
    }
    bool identities = divergence::proxy_a_distance(0.5) == 0.0 && divergence::proxy_a_distance(0.0) == 2.0;
    for (int i = 0; i <= 1000; ++i) {
        const double d = divergence::proxy_a_distance(i / 2000.0);
        identities = identities && d >= 0.0 && d <= 2.0;
    }
    for (const auto* set : {&raw, &nn, &dn}) {
        for (double d : *set) identities = identities && d >= 0.0 && d <= 2.0;
    }
    const double r = median(raw), n = median(nn), d = median(dn);
    return {d < n && d < r && identities,
            "median PAD raw " + fmt(r) + ", NN " + fmt(n) + ", DANN " + fmt(d) +
                (identities ? ", identities hold" : ", identity violated")};
}

// 7. Reverse validation between λ = 0 and λ = 6.
Outcome reverse_validation() {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto task = moons_task(seed);
        shallow::ShallowConfig base;
        base.max_epochs = 200;
        selection::GridSearchOptions o;
        o.seed = seed;
        o.jobs = 2;
        const auto ranking = selection::grid_search(
            {{0.0, 15, 0.07}, {6.0, 15, 0.07}}, task.source, task.target,
            [&](const selection::Candidate& c) { return selection::shallow_trainer(c, base, 10); }, o);
        wins += ranking.front().config.lambda == 6.0;
    }
    return {wins >= 6, "lambda = 6 selected in " + std::to_string(wins) + " of 10 seeds"};
}

// 8. Learning-rate and adaptation schedules.
Outcome schedules() {
    const grl::Schedule s;
    bool ok = grl::lr_schedule(0.0, s) == 0.01 && grl::lambda_schedule(0.0, s) == 0.0;
    ok = ok && std::abs(grl::lambda_schedule(1.0, s) - (2.0 / (1.0 + std::exp(-10.0)) - 1.0)) <= 1e-12;
    for (int i = 1; i < 1000; ++i) {
        const double p0 = (i - 1) / 999.0, p1 = i / 999.0;
        ok = ok && grl::lr_schedule(p1, s) < grl::lr_schedule(p0, s);
        ok = ok && grl::lambda_schedule(p1, s) > grl::lambda_schedule(p0, s);
    }
    return {ok, "endpoints and monotonicity on a 1000-point grid"};
}

// 9. Numeric kernels, PCA and file round trips.
Outcome numeric_suite() {
    Rng rng(9009);
    std::vector<std::string> failures;
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_vector(rng, 1 + rng.index(10), 30.0);
        const auto p = softmax(a);
        double sum = 0.0;
        for (double v : p) sum += v;
        if (std::abs(sum - 1.0) > 1e-10) failures.push_back("softmax normalization");
        auto shifted = a;
        const double c = rng.uniform(-50.0, 50.0);
        for (auto& v : shifted) v += c;
        if (max_abs_diff(p, softmax(shifted)) > 1e-10) failures.push_back("softmax shift");
        const double x = rng.uniform(-40.0, 40.0);
        if (std::abs(sigm(x) + sigm(-x) - 1.0) > 1e-10) failures.push_back("sigm symmetry");
    }
    if (std::abs(nll_loss(Vector{0.25, 0.75}, 0) - 1.3862943611198906) > 1e-10) failures.push_back("nll");
    if (std::abs(nll_loss(Vector{0.5, 0.5}, 1) - 0.6931471805599453) > 1e-10) failures.push_back("nll");
    if (std::abs(bce_loss(0.9, 1) - 0.10536051565782628) > 1e-10) failures.push_back("bce");
    if (std::abs(bce_loss(0.5, 0) - 0.6931471805599453) > 1e-10) failures.push_back("bce");

    std::vector<Vector> pts(500, Vector(6));
    for (auto& p : pts) {
        for (std::size_t j = 0; j < 6; ++j) p[j] = rng.normal() * (1.0 + 0.5 * j);
    }
    const auto pca = divergence::pca_project(pts, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            if (std::abs(dot(pca.components[i], pca.components[j]) - (i == j ? 1.0 : 0.0)) > 1e-8)
                failures.push_back("pca orthonormality");
        }
    }

    const auto samples = gen_moons(100, 0.1, 5);
    std::stringstream sparse, csv;
    write_sparse(sparse, to_records(samples, 2));
    if (!(parse_sparse(sparse).labeled() == samples)) failures.push_back("sparse round trip");
    write_csv(csv, to_records(samples, 2));
    if (!(parse_csv(csv).labeled() == samples)) failures.push_back("csv round trip");
    shallow::ShallowModel model;
    model.params = shallow::init_params(2, 5, 2, 3);
    const auto text = io::dump(io::to_json(model));
    if (!(io::shallow_model_from_json(io::json::parse(text)).params == model.params))
        failures.push_back("model round trip");

    return {failures.empty(), failures.empty() ? "all kernel checks hold" : "failed: " + failures.front()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 10. Every manifest replays to byte-identical outputs.
Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "dann_acceptance_replay";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string() + "/";
    std::ostringstream sink, err;
    const std::vector<std::vector<std::string>> runs{
        {"moons", "--out-dir", d + "data", "--seed", "7"},
        {"train", "--source", d + "data/source.sparse", "--target", d + "data/target.sparse", "--target-eval",
         d + "data/target_eval.sparse", "--epochs", "30", "--model-out", d + "m.json", "--metrics-out",
         d + "metrics.json"},
        {"train", "--engine", "deep", "--source", d + "data/source.sparse", "--target", d + "data/target.sparse",
         "--epochs", "10", "--model-out", d + "g.json", "--metrics-out", d + "g_metrics.json"},
        {"eval", "--model", d + "m.json", "--data", d + "data/target_eval.sparse", "--out", d + "eval.json"},
        {"boundary", "--model", d + "m.json", "--data", d + "data/source.sparse", "--resolution", "50", "--out",
         d + "boundary.csv"},
        {"hidden-neurons", "--model", d + "m.json", "--data", d + "data/source.sparse", "--out", d + "lines.csv"},
        {"pad", "--source", d + "data/source.sparse", "--target", d + "data/target.sparse", "--model", d + "m.json",
         "--jobs", "4", "--h-divergence", "--out", d + "pad.json"},
        {"pca", "--source", d + "data/source.sparse", "--target", d + "data/target.sparse", "--model", d + "m.json",
         "--out", d + "pca.csv"},
        {"reverse-validate", "--source", d + "data/source.sparse", "--target", d + "data/target.sparse",
         "--lambdas", "0,6", "--hidden", "15", "--lrs", "0.07", "--epochs", "20", "--jobs", "2", "--out",
         d + "rv.json"},
    };
    const std::vector<std::string> manifests{d + "data/manifest.json",   d + "metrics.json.manifest.json",
                                             d + "g_metrics.json.manifest.json", d + "eval.json.manifest.json",
                                             d + "boundary.csv.manifest.json",   d + "lines.csv.manifest.json",
                                             d + "pad.json.manifest.json",       d + "pca.csv.manifest.json",
                                             d + "rv.json.manifest.json"};
    for (const auto& args : runs) {
        if (cli::run(args, sink, err) != cli::kOk) return {false, args.front() + " failed: " + err.str()};
    }
    std::size_t files = 0;
    for (const auto& m : manifests) {
        std::vector<std::string> before;
        const auto doc = io::load_json(m);
        for (const auto& o : doc["outputs"]) before.push_back(slurp(o["path"].get<std::string>()));
        std::ostringstream report;
        if (cli::run({"replay", m}, report, err) != cli::kOk) return {false, "replay of " + m + " differs"};
        std::size_t i = 0;
        for (const auto& o : doc["outputs"]) {
            if (slurp(o["path"].get<std::string>()) != before[i++]) return {false, "bytes changed in replay of " + m};
            ++files;
        }
    }
    return {true, std::to_string(manifests.size()) + " manifests, " + std::to_string(files) +
                      " output files byte-identical"};
}

} // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, gradient_audit},     {2, grl_contract}, {3, cross_engine}, {4, ablation_identity},
        {5, moons_adaptation},   {6, pad_behavior}, {7, reverse_validation}, {8, schedules},
        {9, numeric_suite},      {10, determinism},
    };
    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(secs, 2) << " s) "
                  << o.detail << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
