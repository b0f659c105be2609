#include "dann/cli.hpp"

#include "dann/data.hpp"
#include "dann/divergence.hpp"
#include "dann/grl_engine.hpp"
#include "dann/io.hpp"
#include "dann/model_selection.hpp"
#include "dann/random.hpp"
#include "dann/shallow_dann.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <variant>

namespace dann::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

/// Reads `key = value` files through CLI11 and flat JSON objects itself.
/// Unsectioned keys are routed to the subcommand being run.
class KeyValueOrJsonConfig : public CLI::ConfigTOML {
public:
    explicit KeyValueOrJsonConfig(const CLI::App& app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = parse(input);
        const auto subs = app_.get_subcommands();
        if (!subs.empty()) {
            for (auto& item : items) {
                if (item.parents.empty()) item.parents.push_back(subs.front()->get_name());
            }
        }
        return items;
    }

private:
    const CLI::App& app_;

    std::vector<CLI::ConfigItem> parse(std::istream& input) const {
        std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream in(text);
            return CLI::ConfigTOML::from_config(in);
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw CLI::FileError(std::string("config file is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : doc.items()) {
            CLI::ConfigItem item;
            item.name = key;
            auto scalar = [](const nlohmann::json& v) {
                if (v.is_string()) return v.get<std::string>();
                if (v.is_number_float()) return format_double(v.get<double>());
                return v.dump();
            };
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
        return items;
    }
};

struct InvalidData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading", IoError::Kind::read);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string absolute_string(const fs::path& p) {
    return fs::absolute(p).lexically_normal().string();
}

/// Records inputs, writes outputs and assembles the run manifest.
class Run {
public:
    Run(std::string command, std::vector<std::string> argv, const CLI::App& sub)
        : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {
        for (const auto* opt : sub.get_options()) {
            const std::string name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            const bool flag = opt->get_expected_min() == 0;
            if (flag) {
                config_[name] = opt->count() > 0;
            } else if (opt->count() > 0) {
                const auto& res = opt->results();
                std::string joined;
                for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? "," : "") + res[i];
                config_[name] = joined;
            } else {
                config_[name] = opt->get_default_str();
            }
        }
    }

    void input(const fs::path& path) {
        inputs_.push_back({{"path", absolute_string(path)}, {"fnv1a64", io::hex64(fnv1a64(read_bytes(path)))}});
    }

    void write(const fs::path& path, const std::string& text) {
        io::save_text(path, text);
        outputs_.push_back({{"path", absolute_string(path)}, {"fnv1a64", io::hex64(fnv1a64(text))}});
    }

    void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

    int index_base = 0;
    bool csv_header = false;

    void finish(const fs::path& manifest_path) {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        ojson m;
        m["command"] = command_;
        m["argv"] = argv_;
        m["cwd"] = fs::current_path().string();
        m["config"] = config_;
        m["seeds"] = seeds_;
        m["inputs"] = inputs_;
        m["input_hash"] = "fnv1a64";
        m["outputs"] = outputs_;
        m["wall_clock_seconds"] = seconds;
        m["library_version"] = kVersion;
        io::save_text(manifest_path, io::dump(m));
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    std::chrono::steady_clock::time_point start_;
    ojson config_ = ojson::object();
    ojson seeds_ = ojson::object();
    ojson inputs_ = ojson::array();
    ojson outputs_ = ojson::array();
};

fs::path manifest_for(const std::string& flag, const fs::path& primary) {
    if (!flag.empty()) return flag;
    return fs::path(primary.string() + ".manifest.json");
}

// Dataset files.

bool is_csv(const fs::path& p) {
    return p.extension() == ".csv";
}

RecordSet load_records(Run& run, const fs::path& path, std::optional<std::size_t> dim = std::nullopt) {
    run.input(path);
    RecordSet r;
    if (is_csv(path)) {
        CsvOptions o;
        o.header = run.csv_header;
        r = load_csv(path, o);
    } else {
        SparseOptions o;
        o.dim = dim;
        o.index_base = run.index_base;
        r = load_sparse(path, o);
    }
    if (r.size() == 0) throw InvalidData(path.string() + " contains no records");
    if (dim && r.dim != *dim) {
        throw InvalidData(path.string() + " has dimension " + std::to_string(r.dim) + ", expected " +
                          std::to_string(*dim));
    }
    return r;
}

std::string render_records(const fs::path& path, const RecordSet& records) {
    std::ostringstream out;
    if (is_csv(path)) {
        write_csv(out, records);
    } else {
        write_sparse(out, records);
    }
    return out.str();
}

struct Inputs {
    std::vector<LabeledSample> source;
    std::vector<Vector> target;
    std::size_t dim = 0;
};

Inputs load_pair(Run& run, const fs::path& source_path, const fs::path& target_path, bool need_labels) {
    Inputs in;
    const auto s = load_records(run, source_path);
    in.dim = s.dim;
    if (need_labels) {
        in.source = s.labeled();
    } else {
        for (const auto& x : s.x) in.source.push_back({x, 0});
    }
    in.target = load_records(run, target_path, in.dim).x;
    return in;
}

// Models.

struct Model {
    std::variant<shallow::ShallowModel, grl::DeepResult> value;

    bool is_shallow() const { return value.index() == 0; }
    const shallow::ShallowParams& shallow_params() const { return std::get<0>(value).params; }
    const grl::LayerGraph& graph() const { return std::get<1>(value).graph; }

    std::size_t input_dim() const { return is_shallow() ? shallow_params().input_dim() : graph().input_dim(); }

    std::size_t predict(std::span<const double> x) const {
        return is_shallow() ? shallow::predict_class(shallow_params(), x) : grl::predict_class(graph(), x);
    }
    double domain_prob(std::span<const double> x) const {
        if (is_shallow()) {
            const auto& p = shallow_params();
            return shallow::predict_domain(shallow::forward_features(x, p), p);
        }
        return grl::forward(graph(), x).domain_prob;
    }
    Vector features(std::span<const double> x) const {
        return is_shallow() ? shallow::forward_features(x, shallow_params()) : grl::features(graph(), x);
    }
};

Model load_model(Run& run, const fs::path& path) {
    run.input(path);
    const auto doc = io::load_json(path);
    if (io::model_kind(doc) == "shallow") return {io::shallow_model_from_json(doc)};
    return {grl::DeepResult{io::graph_from_json(doc), io::graph_log_from_json(doc)}};
}

void check_dim(const Model& m, std::size_t dim, const std::string& what) {
    if (m.input_dim() != dim) {
        throw InvalidData(what + " has dimension " + std::to_string(dim) + " but the model expects " +
                          std::to_string(m.input_dim()));
    }
}

std::vector<Vector> represent(const std::optional<Model>& model, const std::vector<Vector>& xs) {
    if (!model) return xs;
    std::vector<Vector> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(model->features(x));
    return out;
}

// Plot boxes.

struct Box {
    double xmin, xmax, ymin, ymax;
};

Box plot_box(Run& run, const std::vector<std::string>& data, const std::vector<double>& bounds, double margin) {
    if (!bounds.empty()) {
        if (bounds.size() != 4 || !(bounds[0] < bounds[1]) || !(bounds[2] < bounds[3])) {
            throw InvalidData("--bounds expects xmin,xmax,ymin,ymax with min < max");
        }
        return {bounds[0], bounds[1], bounds[2], bounds[3]};
    }
    if (data.empty()) throw CLI::ValidationError("--data or --bounds", "one of them is required");
    Box b{INFINITY, -INFINITY, INFINITY, -INFINITY};
    for (const auto& path : data) {
        const auto r = load_records(run, path);
        if (r.dim != 2) throw InvalidData(path + " is not 2-D");
        for (const auto& x : r.x) {
            b.xmin = std::min(b.xmin, x[0]);
            b.xmax = std::max(b.xmax, x[0]);
            b.ymin = std::min(b.ymin, x[1]);
            b.ymax = std::max(b.ymax, x[1]);
        }
    }
    const double wx = std::max(b.xmax - b.xmin, 1e-12), wy = std::max(b.ymax - b.ymin, 1e-12);
    return {b.xmin - margin * wx, b.xmax + margin * wx, b.ymin - margin * wy, b.ymax + margin * wy};
}

// Commands.

struct Common {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string manifest;
    int index_base = 0;
    bool csv_header = false;
};

void add_common(CLI::App* sub, Common& c, bool jobs) {
    sub->add_option("--seed", c.seed, "Root seed for every random stream")->envname("DANN_SEED")->capture_default_str();
    if (jobs) {
        sub->add_option("--jobs", c.jobs, "Worker threads")->envname("DANN_JOBS")->check(CLI::PositiveNumber)
            ->capture_default_str();
    }
    sub->add_option("--manifest", c.manifest, "Run manifest path (default: <output>.manifest.json)");
    sub->add_option("--index-base", c.index_base, "First feature index in sparse input files")
        ->check(CLI::IsMember({0, 1}))
        ->capture_default_str();
    sub->add_flag("--csv-header", c.csv_header, "CSV input files start with a header row");
}

struct MoonsOpts {
    Common common;
    std::string out_dir;
    std::size_t per_class = 150;
    std::size_t n_target = 300;
    double degrees = 35.0;
    double noise = 0.1;
    std::string format = "sparse";
};

void cmd_moons(const MoonsOpts& o, Run& run) {
    run.seed("seed", o.common.seed);
    const auto task = make_moons_task({o.per_class, o.n_target, o.degrees, o.noise, o.common.seed});
    run.seed("data", o.common.seed);
    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    const std::string ext = o.format == "csv" ? ".csv" : ".sparse";
    const auto source = to_records(task.source, 2);
    const auto target = to_records(task.target, 2);
    const auto eval = to_records(labeled_target(task), 2);
    run.write(dir / ("source" + ext), render_records(dir / ("source" + ext), source));
    run.write(dir / ("target" + ext), render_records(dir / ("target" + ext), target));
    run.write(dir / ("target_eval" + ext), render_records(dir / ("target_eval" + ext), eval));
    run.finish(o.common.manifest.empty() ? dir / "manifest.json" : fs::path(o.common.manifest));
}

struct TrainOpts {
    Common common;
    std::string source, target, target_eval, source_test, validation;
    std::string engine = "shallow";
    std::string arch;
    std::string model_out, metrics_out;
    double lambda = 6.0;
    std::size_t hidden = 15;
    double lr = 0.07;
    std::size_t epochs = 200;
    std::size_t patience = 10;
    bool no_adversarial = false;
    bool shuffle = false;
    std::size_t batch = 32;
    double momentum = 0.9;
    grl::Schedule schedule;
};

void cmd_train(const TrainOpts& o, const CLI::App& sub, Run& run) {
    run.seed("seed", o.common.seed);
    const auto in = load_pair(run, o.source, o.target, true);
    DomainDataset data;
    data.source = in.source;
    data.target = in.target;
    data.feature_dim = in.dim;
    data.num_classes = std::max<std::size_t>(count_classes(in.source), 2);

    std::optional<std::vector<LabeledSample>> target_eval, source_test, validation;
    if (!o.target_eval.empty()) target_eval = load_records(run, o.target_eval, in.dim).labeled();
    if (!o.source_test.empty()) source_test = load_records(run, o.source_test, in.dim).labeled();
    if (!o.validation.empty()) validation = load_records(run, o.validation, in.dim).labeled();
    for (const auto* set : {&target_eval, &source_test, &validation}) {
        if (*set && count_classes(**set) > data.num_classes) throw InvalidData("evaluation labels exceed the classes in S");
    }

    ojson metrics;
    metrics["engine"] = o.engine;
    run.seed("init", Rng::stream(o.common.seed, "init").next());
    std::string model_text;
    const auto& eval_source = source_test ? *source_test : data.source;

    if (o.engine == "shallow") {
        shallow::ShallowConfig c;
        c.hidden_size = o.hidden;
        c.lambda = o.lambda;
        c.learning_rate = o.lr;
        c.max_epochs = o.epochs;
        c.seed = o.common.seed;
        c.adversarial = !o.no_adversarial;
        c.shuffle = o.shuffle;
        if (validation) c.early_stopping = shallow::EarlyStopping{o.patience, *validation};
        const auto model = shallow::train(data, c);
        metrics["source_acc"] = shallow::evaluate(model, eval_source);
        metrics["target_acc"] = target_eval ? ojson(shallow::evaluate(model, *target_eval)) : ojson(nullptr);
        metrics["final_E"] = shallow::objective(model.params, data.source, data.target, c.lambda);
        metrics["epochs_run"] = model.training_log.size();
        metrics["network_param_hash"] = io::hex64(io::network_param_hash(model.params));
        model_text = io::dump(io::to_json(model));
    } else if (o.engine == "deep") {
        grl::Architecture arch = o.arch.empty() ? grl::shallow_architecture(in.dim, o.hidden, data.num_classes)
                                                : (run.input(o.arch), io::load_architecture(o.arch, in.dim));
        const auto graph = grl::build_graph(arch, Rng::stream(o.common.seed, "init").next());
        if (graph.num_classes() != data.num_classes) {
            throw InvalidData("label head has " + std::to_string(graph.num_classes()) + " outputs but S has " +
                              std::to_string(data.num_classes) + " classes");
        }
        grl::DeepConfig c;
        c.schedule = o.schedule;
        c.batch_size = o.batch;
        c.epochs = o.epochs;
        c.seed = o.common.seed;
        c.momentum = o.momentum;
        c.adversarial = !o.no_adversarial;
        c.shuffle = o.shuffle;
        if (sub.count("--lambda") > 0) c.fixed_lambda = o.lambda;
        const auto result = grl::train_deep(graph, data, c);
        metrics["source_acc"] = grl::evaluate(result.graph, eval_source);
        metrics["target_acc"] = target_eval ? ojson(grl::evaluate(result.graph, *target_eval)) : ojson(nullptr);
        const double final_lambda = result.log.empty() ? 0.0 : result.log.back().lambda_p;
        metrics["final_E"] = grl::pseudo_objective(result.graph, {data.source, data.target}, final_lambda);
        metrics["epochs_run"] = result.log.size();
        metrics["network_param_hash"] = io::hex64(io::network_param_hash(result.graph));
        metrics["capacity_warnings"] = grl::capacity_warnings(result.graph);
        model_text = io::dump(io::to_json(result.graph, result.log));
    } else {
        throw CLI::ValidationError("--engine", "must be shallow or deep");
    }
    run.write(o.model_out, model_text);
    run.write(o.metrics_out, io::dump(metrics));
    run.finish(manifest_for(o.common.manifest, o.metrics_out));
}

struct EvalOpts {
    Common common;
    std::string model, data, out;
};

void cmd_eval(const EvalOpts& o, Run& run, std::ostream& out) {
    const auto model = load_model(run, o.model);
    const auto samples = load_records(run, o.data, model.input_dim()).labeled();
    std::size_t correct = 0;
    for (const auto& s : samples) correct += model.predict(s.x) == s.y;
    ojson r;
    r["model_kind"] = model.is_shallow() ? "shallow" : "graph";
    r["n"] = samples.size();
    r["accuracy"] = static_cast<double>(correct) / static_cast<double>(samples.size());
    if (o.out.empty()) {
        out << io::dump(r);
        return;
    }
    run.write(o.out, io::dump(r));
    run.finish(manifest_for(o.common.manifest, o.out));
}

struct BoxOpts {
    std::vector<std::string> data;
    std::vector<double> bounds;
    double margin = 0.1;
};

void add_box(CLI::App* sub, BoxOpts& b) {
    sub->add_option("--data", b.data, "Dataset files whose bounding box sets the plot area");
    sub->add_option("--bounds", b.bounds, "Explicit plot area xmin,xmax,ymin,ymax")->delimiter(',')->expected(4);
    sub->add_option("--margin", b.margin, "Relative margin around the data bounding box")->capture_default_str();
}

struct BoundaryOpts {
    Common common;
    std::string model, out;
    BoxOpts box;
    std::size_t resolution = 300;
};

void cmd_boundary(const BoundaryOpts& o, Run& run) {
    const auto model = load_model(run, o.model);
    if (model.input_dim() != 2) throw InvalidData("boundary needs a model with 2-D inputs");
    const Box b = plot_box(run, o.box.data, o.box.bounds, o.box.margin);
    const std::size_t r = o.resolution;
    auto at = [r](double lo, double hi, std::size_t i) {
        return r == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(r - 1);
    };
    std::string csv = "x,y,label,domain_prob\n";
    for (std::size_t j = 0; j < r; ++j) {
        const double y = at(b.ymin, b.ymax, j);
        for (std::size_t i = 0; i < r; ++i) {
            const double x = at(b.xmin, b.xmax, i);
            const Vector p{x, y};
            csv += format_double(x) + ',' + format_double(y) + ',' + std::to_string(model.predict(p)) + ',' +
                   format_double(model.domain_prob(p)) + '\n';
        }
    }
    run.write(o.out, csv);
    run.finish(manifest_for(o.common.manifest, o.out));
}

struct NeuronOpts {
    Common common;
    std::string model, out;
    BoxOpts box;
};

void cmd_hidden_neurons(const NeuronOpts& o, Run& run) {
    const auto model = load_model(run, o.model);
    shallow::ShallowParams p;
    try {
        p = model.is_shallow() ? model.shallow_params() : grl::to_shallow(model.graph());
    } catch (const std::invalid_argument& e) {
        throw InvalidData(e.what());
    }
    if (p.input_dim() != 2) throw InvalidData("hidden-neurons needs a model with 2-D inputs");
    const Box b = plot_box(run, o.box.data, o.box.bounds, o.box.margin);

    std::string csv = "unit,x0,y0,x1,y1,status\n";
    for (std::size_t i = 0; i < p.hidden_size(); ++i) {
        const double w0 = p.W(i, 0), w1 = p.W(i, 1), c = p.b[i];
        std::vector<std::pair<double, double>> hits;
        auto add = [&](double x, double y) {
            const double tx = 1e-12 * (b.xmax - b.xmin), ty = 1e-12 * (b.ymax - b.ymin);
            if (x < b.xmin - tx || x > b.xmax + tx || y < b.ymin - ty || y > b.ymax + ty) return;
            x = std::clamp(x, b.xmin, b.xmax) + 0.0;
            y = std::clamp(y, b.ymin, b.ymax) + 0.0;
            for (const auto& h : hits) {
                if (std::abs(h.first - x) <= tx && std::abs(h.second - y) <= ty) return;
            }
            hits.emplace_back(x, y);
        };
        if (w1 != 0.0) {
            for (double x : {b.xmin, b.xmax}) add(x, -(c + w0 * x) / w1);
        }
        if (w0 != 0.0) {
            for (double y : {b.ymin, b.ymax}) add(-(c + w1 * y) / w0, y);
        }
        csv += std::to_string(i);
        if (w0 == 0.0 && w1 == 0.0) {
            csv += ",,,,,degenerate\n";
            continue;
        }
        if (hits.size() < 2) {
            csv += ",,,,,outside\n";
            continue;
        }
        std::size_t a = 0, z = 1;
        double best = -1.0;
        for (std::size_t s = 0; s < hits.size(); ++s) {
            for (std::size_t t = s + 1; t < hits.size(); ++t) {
                const double d = std::hypot(hits[s].first - hits[t].first, hits[s].second - hits[t].second);
                if (d > best) {
                    best = d;
                    a = s;
                    z = t;
                }
            }
        }
        csv += ',' + format_double(hits[a].first) + ',' + format_double(hits[a].second) + ',' +
               format_double(hits[z].first) + ',' + format_double(hits[z].second) + ",ok\n";
    }
    run.write(o.out, csv);
    run.finish(manifest_for(o.common.manifest, o.out));
}

struct PadOpts {
    Common common;
    std::string source, target, model, out, grid_csv;
    std::string format = "json";
    std::vector<double> c_grid;
    std::size_t passes = 50;
    std::string discriminator = "linear";
    bool h_divergence = false;
};

void cmd_pad(const PadOpts& o, Run& run) {
    run.seed("seed", o.common.seed);
    const auto in = load_pair(run, o.source, o.target, false);
    std::optional<Model> model;
    if (!o.model.empty()) {
        model = load_model(run, o.model);
        check_dim(*model, in.dim, o.source);
    }
    const auto S = represent(model, features_of(in.source));
    const auto T = represent(model, in.target);

    divergence::PadOptions p;
    if (!o.c_grid.empty()) p.C_grid = o.c_grid;
    p.seed = o.common.seed;
    p.jobs = o.common.jobs;
    p.discriminator.passes = o.passes;
    p.discriminator.kind =
        o.discriminator == "mlp" ? divergence::DiscriminatorKind::mlp : divergence::DiscriminatorKind::linear;
    run.seed("pad", o.common.seed);
    const auto report = divergence::pad(S, T, p);

    std::string grid = "C,error\n";
    for (const auto& [C, err] : report.grid) grid += format_double(C) + ',' + format_double(err) + '\n';
    ojson r;
    r["representation"] = model ? "hidden" : "raw";
    r["discriminator"] = o.discriminator;
    r["n_source"] = S.size();
    r["n_target"] = T.size();
    r["epsilon"] = report.epsilon;
    r["d_hat_A"] = report.d_hat_A;
    ojson g = ojson::array();
    for (const auto& [C, err] : report.grid) g.push_back({{"C", C}, {"error", err}});
    r["grid"] = std::move(g);
    if (o.h_divergence) r["d_hat_H"] = divergence::empirical_h_divergence(S, T, p);

    run.write(o.out, o.format == "csv" ? grid : io::dump(r));
    if (!o.grid_csv.empty()) run.write(o.grid_csv, grid);
    run.finish(manifest_for(o.common.manifest, o.out));
}

struct PcaOpts {
    Common common;
    std::string source, target, model, out;
    std::string format = "csv";
    std::size_t k = 2;
};

void cmd_pca(const PcaOpts& o, Run& run) {
    const auto in = load_pair(run, o.source, o.target, false);
    std::optional<Model> model;
    if (!o.model.empty()) {
        model = load_model(run, o.model);
        check_dim(*model, in.dim, o.source);
    }
    auto points = represent(model, features_of(in.source));
    const std::size_t n_source = points.size();
    for (auto& t : represent(model, in.target)) points.push_back(std::move(t));
    divergence::PcaResult pca;
    try {
        pca = divergence::pca_project(points, o.k);
    } catch (const divergence::DivergenceError& e) {
        throw InvalidData(e.what());
    }
    auto domain = [n_source](std::size_t i) { return i < n_source ? "source" : "target"; };

    std::string text;
    if (o.format == "json") {
        ojson r;
        r["representation"] = model ? "hidden" : "raw";
        r["k"] = o.k;
        r["mean"] = pca.mean;
        r["components"] = pca.components;
        r["explained_variance"] = pca.explained_variance;
        r["explained_variance_ratio"] = pca.explained_variance_ratio;
        ojson pts = ojson::array();
        for (std::size_t i = 0; i < points.size(); ++i) pts.push_back({{"coords", pca.projected[i]}, {"domain", domain(i)}});
        r["points"] = std::move(pts);
        text = io::dump(r);
    } else {
        for (std::size_t j = 0; j < o.k; ++j) text += "pc" + std::to_string(j + 1) + ',';
        text += "domain\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            for (double v : pca.projected[i]) text += format_double(v) + ',';
            text += domain(i);
            text += '\n';
        }
    }
    run.write(o.out, text);
    run.finish(manifest_for(o.common.manifest, o.out));
}

struct RvOpts {
    Common common;
    std::string source, target, out;
    std::string format = "json";
    std::vector<double> lambdas;
    std::vector<std::size_t> hidden;
    std::vector<double> lrs;
    std::size_t epochs = 200;
    std::size_t patience = 10;
    std::size_t repeats = 1;
};

void cmd_reverse_validate(const RvOpts& o, Run& run) {
    run.seed("seed", o.common.seed);
    const auto in = load_pair(run, o.source, o.target, true);
    auto grid = selection::default_grid();
    if (!o.lambdas.empty()) grid.lambdas = o.lambdas;
    if (!o.hidden.empty()) grid.hidden_sizes = o.hidden;
    if (!o.lrs.empty()) grid.learning_rates = o.lrs;
    shallow::ShallowConfig base;
    base.max_epochs = o.epochs;
    const std::size_t patience = o.patience;
    selection::GridSearchOptions g;
    g.repeats = o.repeats;
    g.seed = o.common.seed;
    g.jobs = o.common.jobs;
    for (std::size_t r = 0; r < o.repeats; ++r) {
        run.seed("split-" + std::to_string(r), selection::repeat_split_seed(o.common.seed, r));
    }
    std::vector<selection::GridEntry> ranking;
    try {
        ranking = selection::grid_search(
            grid.candidates(), in.source, in.target,
            [&](const selection::Candidate& c) { return selection::shallow_trainer(c, base, patience); }, g);
    } catch (const selection::SelectionError& e) {
        throw InvalidData(e.what());
    }

    std::string text;
    if (o.format == "csv") {
        text = "rank,lambda,hidden_size,learning_rate,risk\n";
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            const auto& e = ranking[i];
            text += std::to_string(i + 1) + ',' + format_double(e.config.lambda) + ',' +
                    std::to_string(e.config.hidden_size) + ',' + format_double(e.config.learning_rate) + ',' +
                    format_double(e.risk) + '\n';
        }
    } else {
        ojson rows = ojson::array();
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            const auto& e = ranking[i];
            rows.push_back({{"rank", i + 1},
                            {"lambda", e.config.lambda},
                            {"hidden_size", e.config.hidden_size},
                            {"learning_rate", e.config.learning_rate},
                            {"risk", e.risk},
                            {"repeat_risks", e.repeat_risks}});
        }
        ojson r;
        r["repeats"] = o.repeats;
        r["ranking"] = std::move(rows);
        text = io::dump(r);
    }
    run.write(o.out, text);
    run.finish(manifest_for(o.common.manifest, o.out));
}

int replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
    const auto m = io::load_json(manifest_path);
    if (!m.contains("argv") || !m.contains("outputs") || !m.contains("cwd")) {
        throw InvalidData(manifest_path + " is not a run manifest");
    }
    for (const auto& in : m.value("inputs", nlohmann::json::array())) {
        const std::string path = in.at("path");
        if (io::hex64(fnv1a64(read_bytes(path))) != in.at("fnv1a64")) {
            err << "input " << path << " changed since the recorded run\n";
            return kInputError;
        }
    }
    const auto args = m.at("argv").get<std::vector<std::string>>();
    if (!args.empty() && args.front() == "replay") throw InvalidData("refusing to replay a replay");

    const auto cwd = fs::current_path();
    std::ostringstream sink;
    int code;
    try {
        fs::current_path(m.at("cwd").get<std::string>());
        code = run(args, sink, err);
    } catch (...) {
        fs::current_path(cwd);
        throw;
    }
    fs::current_path(cwd);
    if (code != kOk) return code;

    bool identical = true;
    ojson report;
    ojson files = ojson::array();
    for (const auto& o : m.at("outputs")) {
        const std::string path = o.at("path");
        const std::string expected = o.at("fnv1a64");
        const std::string actual = io::hex64(fnv1a64(read_bytes(path)));
        identical = identical && actual == expected;
        files.push_back({{"path", path}, {"expected", expected}, {"actual", actual}, {"identical", actual == expected}});
    }
    report["identical"] = identical;
    report["outputs"] = std::move(files);
    out << io::dump(report);
    return identical ? kOk : kReplayMismatch;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Domain-adversarial training of neural networks"};
    app.name("dann");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.fallthrough();
    app.set_config("--config", "", "key=value or JSON file with option defaults for the command");
    app.config_formatter(std::make_shared<KeyValueOrJsonConfig>(app));

    MoonsOpts moons;
    auto* s_moons = app.add_subcommand("moons", "Generate the rotated inter-twinning moons task");
    add_common(s_moons, moons.common, false);
    s_moons->add_option("--out-dir", moons.out_dir, "Output directory")->required();
    s_moons->add_option("--per-class", moons.per_class, "Source examples per class")->capture_default_str();
    s_moons->add_option("--n-target", moons.n_target, "Target examples")->capture_default_str();
    s_moons->add_option("--degrees", moons.degrees, "Target rotation in degrees")->capture_default_str();
    s_moons->add_option("--noise", moons.noise, "Gaussian noise standard deviation")->capture_default_str();
    s_moons->add_option("--format", moons.format, "File format")
        ->check(CLI::IsMember({"sparse", "csv"}))
        ->capture_default_str();

    TrainOpts train;
    auto* s_train = app.add_subcommand("train", "Train a shallow or layered DANN");
    add_common(s_train, train.common, false);
    s_train->add_option("--source", train.source, "Labeled source file")->required();
    s_train->add_option("--target", train.target, "Unlabeled target file")->required();
    s_train->add_option("--target-eval", train.target_eval, "Labeled target file used only for reporting");
    s_train->add_option("--source-test", train.source_test, "Labeled source test file");
    s_train->add_option("--validation", train.validation, "Labeled file for early stopping (shallow engine)");
    s_train->add_option("--engine", train.engine, "shallow or deep")
        ->check(CLI::IsMember({"shallow", "deep"}))
        ->capture_default_str();
    s_train->add_option("--arch", train.arch, "Architecture file (deep engine)");
    s_train->add_option("--model-out", train.model_out, "Model JSON path")->required();
    s_train->add_option("--metrics-out", train.metrics_out, "Metrics JSON path")->required();
    s_train->add_option("--lambda", train.lambda, "Adaptation weight (fixes lambda for the deep engine)")
        ->capture_default_str();
    s_train->add_option("--hidden", train.hidden, "Hidden layer size")->check(CLI::PositiveNumber)->capture_default_str();
    s_train->add_option("--lr", train.lr, "Learning rate (shallow engine)")->capture_default_str();
    s_train->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
    s_train->add_option("--patience", train.patience, "Early-stopping patience")->capture_default_str();
    s_train->add_flag("--no-adversarial", train.no_adversarial, "Train the NN baseline");
    s_train->add_flag("--shuffle", train.shuffle, "Reshuffle the source each epoch");
    s_train->add_option("--batch", train.batch, "Batch size, half source and half target (deep engine)")
        ->capture_default_str();
    s_train->add_option("--momentum", train.momentum, "Momentum (deep engine)")->capture_default_str();
    s_train->add_option("--mu0", train.schedule.mu0, "Initial learning rate (deep engine)")->capture_default_str();
    s_train->add_option("--alpha", train.schedule.alpha, "Learning-rate decay alpha")->capture_default_str();
    s_train->add_option("--beta", train.schedule.beta, "Learning-rate decay beta")->capture_default_str();
    s_train->add_option("--gamma", train.schedule.gamma, "Lambda schedule gamma")->capture_default_str();

    EvalOpts eval;
    auto* s_eval = app.add_subcommand("eval", "Accuracy of a saved model on a labeled file");
    add_common(s_eval, eval.common, false);
    s_eval->add_option("--model", eval.model, "Model JSON")->required();
    s_eval->add_option("--data", eval.data, "Labeled data file")->required();
    s_eval->add_option("--out", eval.out, "Report path (default: standard output)");

    BoundaryOpts boundary;
    auto* s_boundary = app.add_subcommand("boundary", "Label and domain predictions over a 2-D lattice");
    add_common(s_boundary, boundary.common, false);
    s_boundary->add_option("--model", boundary.model, "Model JSON")->required();
    s_boundary->add_option("--out", boundary.out, "CSV path")->required();
    s_boundary->add_option("--resolution", boundary.resolution, "Points per axis")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_box(s_boundary, boundary.box);

    NeuronOpts neurons;
    auto* s_neurons = app.add_subcommand("hidden-neurons", "Zero-activation lines of each hidden unit");
    add_common(s_neurons, neurons.common, false);
    s_neurons->add_option("--model", neurons.model, "Model JSON")->required();
    s_neurons->add_option("--out", neurons.out, "CSV path")->required();
    add_box(s_neurons, neurons.box);

    PadOpts pad;
    auto* s_pad = app.add_subcommand("pad", "Proxy A-distance between source and target");
    add_common(s_pad, pad.common, true);
    s_pad->add_option("--source", pad.source, "Source file")->required();
    s_pad->add_option("--target", pad.target, "Target file")->required();
    s_pad->add_option("--model", pad.model, "Use this model's hidden representations");
    s_pad->add_option("--out", pad.out, "Report path")->required();
    s_pad->add_option("--grid-csv", pad.grid_csv, "Also write the C grid as CSV");
    s_pad->add_option("--format", pad.format, "Report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    s_pad->add_option("--c-grid", pad.c_grid, "Comma-separated C values")->delimiter(',');
    s_pad->add_option("--passes", pad.passes, "SGD passes per classifier")->capture_default_str();
    s_pad->add_option("--discriminator", pad.discriminator, "linear or mlp")
        ->check(CLI::IsMember({"linear", "mlp"}))
        ->capture_default_str();
    s_pad->add_flag("--h-divergence", pad.h_divergence, "Also report the empirical H-divergence estimate");

    PcaOpts pca;
    auto* s_pca = app.add_subcommand("pca", "Principal-component projection of source and target");
    add_common(s_pca, pca.common, false);
    s_pca->add_option("--source", pca.source, "Source file")->required();
    s_pca->add_option("--target", pca.target, "Target file")->required();
    s_pca->add_option("--model", pca.model, "Project this model's hidden representations");
    s_pca->add_option("-k", pca.k, "Number of components")->check(CLI::PositiveNumber)->capture_default_str();
    s_pca->add_option("--out", pca.out, "Output path")->required();
    s_pca->add_option("--format", pca.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    RvOpts rv;
    auto* s_rv = app.add_subcommand("reverse-validate", "Rank hyper-parameters by reverse validation");
    add_common(s_rv, rv.common, true);
    s_rv->add_option("--source", rv.source, "Labeled source file")->required();
    s_rv->add_option("--target", rv.target, "Unlabeled target file")->required();
    s_rv->add_option("--out", rv.out, "Ranking path")->required();
    s_rv->add_option("--format", rv.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
    s_rv->add_option("--lambdas", rv.lambdas, "Comma-separated lambda values")->delimiter(',');
    s_rv->add_option("--hidden", rv.hidden, "Comma-separated hidden sizes")->delimiter(',');
    s_rv->add_option("--lrs", rv.lrs, "Comma-separated learning rates")->delimiter(',');
    s_rv->add_option("--epochs", rv.epochs, "Maximum epochs per model")->capture_default_str();
    s_rv->add_option("--patience", rv.patience, "Early-stopping patience")->capture_default_str();
    s_rv->add_option("--repeats", rv.repeats, "Split repetitions averaged per candidate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::string replay_manifest;
    auto* s_replay = app.add_subcommand("replay", "Re-run a manifest and compare its outputs byte for byte");
    s_replay->add_option("manifest", replay_manifest, "Manifest JSON")->required();

    std::vector<const char*> argv{"dann"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (s_replay->parsed()) return replay(replay_manifest, out, err);
        for (auto* sub : app.get_subcommands()) {
            Run r(sub->get_name(), args, *sub);
            const Common* common = nullptr;
            if (sub == s_moons) common = &moons.common;
            if (sub == s_train) common = &train.common;
            if (sub == s_eval) common = &eval.common;
            if (sub == s_boundary) common = &boundary.common;
            if (sub == s_neurons) common = &neurons.common;
            if (sub == s_pad) common = &pad.common;
            if (sub == s_pca) common = &pca.common;
            if (sub == s_rv) common = &rv.common;
            r.index_base = common->index_base;
            r.csv_header = common->csv_header;
            if (const auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) r.input(cfg->as<std::string>());
            if (sub == s_moons) cmd_moons(moons, r);
            if (sub == s_train) cmd_train(train, *s_train, r);
            if (sub == s_eval) cmd_eval(eval, r, out);
            if (sub == s_boundary) cmd_boundary(boundary, r);
            if (sub == s_neurons) cmd_hidden_neurons(neurons, r);
            if (sub == s_pad) cmd_pad(pad, r);
            if (sub == s_pca) cmd_pca(pca, r);
            if (sub == s_rv) cmd_reverse_validate(rv, r);
        }
        return kOk;
    } catch (const CLI::ValidationError& e) {
        err << "dann: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        err << "dann: " << e.what() << '\n';
        return e.kind() == IoError::Kind::read ? kInputError : kWriteFailure;
    } catch (const fs::filesystem_error& e) {
        err << "dann: " << e.what() << '\n';
        return kWriteFailure;
    } catch (const DataError& e) {
        err << "dann: " << e.what() << '\n';
        return kInvalidData;
    } catch (const InvalidData& e) {
        err << "dann: " << e.what() << '\n';
        return kInvalidData;
    } catch (const divergence::DivergenceError& e) {
        err << "dann: " << e.what() << '\n';
        return kInvalidData;
    } catch (const std::invalid_argument& e) {
        err << "dann: " << e.what() << '\n';
        return kInvalidData;
    } catch (const std::exception& e) {
        err << "dann: " << e.what() << '\n';
        return kFailure;
    }
}

} // namespace dann::cli
