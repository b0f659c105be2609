#include "dann/io.hpp"

#include "dann/random.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dann::io {

namespace {

using ojson = nlohmann::ordered_json;

ojson vec_json(std::span<const double> v) {
    ojson a = ojson::array();
    for (double x : v) {
        if (!std::isfinite(x)) throw DataError("cannot serialize a non-finite parameter");
        a.push_back(x);
    }
    return a;
}

ojson mat_json(const Matrix& m) {
    ojson a = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r)));
    return a;
}

const json& field(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw DataError(std::string("model document lacks '") + key + "'");
    return doc.at(key);
}

Vector vec_from(const json& j, const char* what) {
    if (!j.is_array()) throw DataError(std::string(what) + " must be an array");
    Vector v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw DataError(std::string(what) + " holds a non-numeric entry");
        v.push_back(x.get<double>());
    }
    return v;
}

Matrix mat_from(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw DataError(std::string(what) + " must be a nonempty array of rows");
    std::vector<Vector> rows;
    for (const auto& r : j) rows.push_back(vec_from(r, what));
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw DataError(std::string(what) + " has ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

void check_format(const json& doc, const char* expected) {
    if (field(doc, "format") != expected) throw DataError(std::string("expected a ") + expected + " document");
    if (field(doc, "version") != kFormatVersion) throw DataError("unsupported model format version");
}

ojson stack_json(const std::vector<grl::DenseLayer>& stack) {
    ojson a = ojson::array();
    for (const auto& l : stack) {
        ojson o;
        o["in_dim"] = l.spec.in_dim;
        o["out_dim"] = l.spec.out_dim;
        o["activation"] = grl::to_string(l.spec.activation);
        o["W"] = mat_json(l.W);
        o["b"] = vec_json(l.b);
        a.push_back(std::move(o));
    }
    return a;
}

std::vector<grl::DenseLayer> stack_from(const json& j, const char* what) {
    if (!j.is_array()) throw DataError(std::string(what) + " must be an array of layers");
    std::vector<grl::DenseLayer> out;
    for (const auto& o : j) {
        grl::DenseLayer l;
        try {
            l.spec.in_dim = field(o, "in_dim").get<std::size_t>();
            l.spec.out_dim = field(o, "out_dim").get<std::size_t>();
            l.spec.activation = grl::activation_from_string(field(o, "activation").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError(std::string(what) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw DataError(std::string(what) + ": " + e.what());
        }
        l.W = mat_from(field(o, "W"), "W");
        l.b = vec_from(field(o, "b"), "b");
        out.push_back(std::move(l));
    }
    return out;
}

void hash_values(std::uint64_t& h, std::span<const double> values) {
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        h = fnv1a64(std::string_view(bytes, 8), h);
    }
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

} // namespace

ojson to_json(const shallow::ShallowModel& model) {
    const auto& p = model.params;
    const auto& c = model.config;
    ojson doc;
    doc["format"] = "dann-shallow-model";
    doc["version"] = kFormatVersion;
    doc["dims"] = {{"m", p.input_dim()}, {"D", p.hidden_size()}, {"L", p.num_classes()}};
    ojson params;
    params["W"] = mat_json(p.W);
    params["b"] = vec_json(p.b);
    params["V"] = mat_json(p.V);
    params["c"] = vec_json(p.c);
    params["u"] = vec_json(p.u);
    params["z"] = p.z;
    doc["params"] = std::move(params);
    ojson config;
    config["hidden_size"] = c.hidden_size;
    config["lambda"] = c.lambda;
    config["learning_rate"] = c.learning_rate;
    config["max_epochs"] = c.max_epochs;
    config["seed"] = c.seed;
    config["adversarial"] = c.adversarial;
    config["shuffle"] = c.shuffle;
    if (c.early_stopping) config["patience"] = c.early_stopping->patience;
    doc["config"] = std::move(config);
    ojson log = ojson::array();
    for (const auto& r : model.training_log) {
        ojson e;
        e["epoch"] = r.epoch;
        e["source_loss"] = r.source_loss;
        e["domain_loss"] = r.domain_loss;
        if (r.validation_risk) e["validation_risk"] = *r.validation_risk;
        log.push_back(std::move(e));
    }
    doc["training_log"] = std::move(log);
    return doc;
}

shallow::ShallowModel shallow_model_from_json(const json& doc) {
    check_format(doc, "dann-shallow-model");
    shallow::ShallowModel model;
    const auto& p = field(doc, "params");
    model.params.W = mat_from(field(p, "W"), "W");
    model.params.b = vec_from(field(p, "b"), "b");
    model.params.V = mat_from(field(p, "V"), "V");
    model.params.c = vec_from(field(p, "c"), "c");
    model.params.u = vec_from(field(p, "u"), "u");
    if (!field(p, "z").is_number()) throw DataError("z must be a number");
    model.params.z = p.at("z").get<double>();
    try {
        model.params.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    const auto& dims = field(doc, "dims");
    if (field(dims, "m") != model.params.input_dim() || field(dims, "D") != model.params.hidden_size() ||
        field(dims, "L") != model.params.num_classes()) {
        throw DataError("declared dims do not match the parameter blocks");
    }
    try {
        if (doc.contains("config")) {
            const auto& c = doc.at("config");
            auto& cfg = model.config;
            cfg.hidden_size = c.value("hidden_size", cfg.hidden_size);
            cfg.lambda = c.value("lambda", cfg.lambda);
            cfg.learning_rate = c.value("learning_rate", cfg.learning_rate);
            cfg.max_epochs = c.value("max_epochs", cfg.max_epochs);
            cfg.seed = c.value("seed", cfg.seed);
            cfg.adversarial = c.value("adversarial", cfg.adversarial);
            cfg.shuffle = c.value("shuffle", cfg.shuffle);
            if (c.contains("patience")) cfg.early_stopping = shallow::EarlyStopping{c.at("patience").get<std::size_t>(), {}};
        }
        if (doc.contains("training_log")) {
            for (const auto& e : doc.at("training_log")) {
                shallow::EpochRecord r;
                r.epoch = e.at("epoch").get<std::size_t>();
                r.source_loss = e.at("source_loss").get<double>();
                r.domain_loss = e.at("domain_loss").get<double>();
                if (e.contains("validation_risk")) r.validation_risk = e.at("validation_risk").get<double>();
                model.training_log.push_back(r);
            }
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model document: ") + e.what());
    }
    return model;
}

ojson to_json(const grl::LayerGraph& graph, const std::vector<grl::DeepEpochRecord>& log) {
    ojson doc;
    doc["format"] = "dann-layer-graph";
    doc["version"] = kFormatVersion;
    doc["grl_coefficient"] = graph.grl_coefficient;
    doc["feature_stack"] = stack_json(graph.feature_stack);
    doc["label_head"] = stack_json(graph.label_head);
    doc["domain_head"] = stack_json(graph.domain_head);
    ojson l = ojson::array();
    for (const auto& r : log) {
        l.push_back({{"epoch", r.epoch},
                     {"label_loss", r.label_loss},
                     {"domain_loss", r.domain_loss},
                     {"mu_p", r.mu_p},
                     {"lambda_p", r.lambda_p}});
    }
    doc["training_log"] = std::move(l);
    return doc;
}

grl::LayerGraph graph_from_json(const json& doc) {
    check_format(doc, "dann-layer-graph");
    grl::LayerGraph g;
    if (!field(doc, "grl_coefficient").is_number()) throw DataError("grl_coefficient must be a number");
    g.grl_coefficient = doc.at("grl_coefficient").get<double>();
    g.feature_stack = stack_from(field(doc, "feature_stack"), "feature_stack");
    g.label_head = stack_from(field(doc, "label_head"), "label_head");
    g.domain_head = stack_from(field(doc, "domain_head"), "domain_head");
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    return g;
}

std::vector<grl::DeepEpochRecord> graph_log_from_json(const json& doc) {
    std::vector<grl::DeepEpochRecord> out;
    if (!doc.contains("training_log")) return out;
    try {
        for (const auto& e : doc.at("training_log")) {
            out.push_back({e.at("epoch").get<std::size_t>(), e.at("label_loss").get<double>(),
                           e.at("domain_loss").get<double>(), e.at("mu_p").get<double>(),
                           e.at("lambda_p").get<double>()});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed training log: ") + e.what());
    }
    return out;
}

std::string model_kind(const json& doc) {
    if (doc.is_object() && doc.contains("format")) {
        if (doc["format"] == "dann-shallow-model") return "shallow";
        if (doc["format"] == "dann-layer-graph") return "graph";
    }
    throw DataError("not a model document");
}

std::string dump(const ojson& doc) {
    return doc.dump(2) + "\n";
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading", IoError::Kind::read);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

void save_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing", IoError::Kind::write);
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path.string(), IoError::Kind::write);
}

grl::Architecture parse_architecture(std::istream& in, std::size_t input_dim) {
    grl::Architecture arch;
    arch.input_dim = input_dim;
    bool seen[3] = {false, false, false};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = line;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        auto fail = [&](const std::string& why) {
            return DataError("architecture line " + std::to_string(line_no) + ": " + why, line_no);
        };
        if (eq == std::string_view::npos) throw fail("expected 'stack = width activation, ...'");
        const std::string name(trim(body.substr(0, eq)));
        grl::StackSpec* target = nullptr;
        int slot = 0;
        if (name == "feature") {
            target = &arch.feature;
        } else if (name == "label") {
            target = &arch.label;
            slot = 1;
        } else if (name == "domain") {
            target = &arch.domain;
            slot = 2;
        } else {
            throw fail("unknown stack '" + name + "'");
        }
        if (seen[slot]) throw fail("stack '" + name + "' given twice");
        seen[slot] = true;

        std::stringstream layers{std::string(body.substr(eq + 1))};
        std::string item;
        while (std::getline(layers, item, ',')) {
            std::istringstream parts(item);
            long long width = 0;
            std::string act, extra;
            if (!(parts >> width >> act) || (parts >> extra) || width <= 0) {
                throw fail("malformed layer '" + std::string(trim(item)) + "'");
            }
            try {
                target->layers.emplace_back(static_cast<std::size_t>(width), grl::activation_from_string(act));
            } catch (const std::invalid_argument& e) {
                throw fail(e.what());
            }
        }
        if (target->layers.empty()) throw fail("stack '" + name + "' has no layers");
    }
    if (!seen[0] || !seen[1] || !seen[2]) throw DataError("architecture must define feature, label and domain stacks");
    return arch;
}

grl::Architecture load_architecture(const std::filesystem::path& path, std::size_t input_dim) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading", IoError::Kind::read);
    return parse_architecture(in, input_dim);
}

std::uint64_t network_param_hash(const shallow::ShallowParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    hash_values(h, p.W.values());
    hash_values(h, p.b);
    hash_values(h, p.V.values());
    hash_values(h, p.c);
    return h;
}

std::uint64_t network_param_hash(const grl::LayerGraph& g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto* stack : {&g.feature_stack, &g.label_head}) {
        for (const auto& l : *stack) {
            hash_values(h, l.W.values());
            hash_values(h, l.b);
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

} // namespace dann::io
