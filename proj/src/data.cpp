#include "dann/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string_view>

namespace dann {

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<std::size_t> parse_label(std::string_view token, std::size_t line) {
    if (token == "?") return std::nullopt;
    long long label = 0;
    if (!parse_int(token, label) || label < 0) {
        throw DataError("invalid label '" + std::string(token) + "' at line " + std::to_string(line), line);
    }
    return static_cast<std::size_t>(label);
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading", IoError::Kind::read);
    return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing", IoError::Kind::write);
    return out;
}

} // namespace

void DomainDataset::validate() const {
    if (source.empty()) throw DataError("dataset has no source samples");
    if (target.empty()) throw DataError("dataset has no target samples");
    if (feature_dim == 0) throw DataError("dataset feature dimension is zero");
    if (num_classes == 0) throw DataError("dataset has zero classes");
    for (const auto& s : source) {
        if (s.x.size() != feature_dim) {
            throw DataError("source sample of dimension " + std::to_string(s.x.size()) + ", expected " +
                            std::to_string(feature_dim));
        }
        if (s.y >= num_classes) throw DataError("source label " + std::to_string(s.y) + " out of range");
    }
    for (const auto& x : target) {
        if (x.size() != feature_dim) {
            throw DataError("target sample of dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(feature_dim));
        }
    }
    if (!target_truth.empty() && target_truth.size() != target.size()) {
        throw DataError("target truth size does not match target sample");
    }
}

std::vector<LabeledSample> labeled_target(const DomainDataset& dataset) {
    if (dataset.target_truth.empty()) throw DataError("dataset carries no target labels for evaluation");
    std::vector<LabeledSample> out;
    out.reserve(dataset.target.size());
    for (std::size_t i = 0; i < dataset.target.size(); ++i) {
        out.push_back({dataset.target[i], dataset.target_truth.labels_[i]});
    }
    return out;
}

std::vector<Vector> features_of(const std::vector<LabeledSample>& samples) {
    std::vector<Vector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.x);
    return out;
}

std::size_t count_classes(const std::vector<LabeledSample>& samples) {
    std::size_t n = 0;
    for (const auto& s : samples) n = std::max(n, s.y + 1);
    return n;
}

std::vector<LabeledSample> gen_moons(std::size_t n_per_class, double noise_sigma, std::uint64_t seed) {
    if (n_per_class == 0) throw DataError("gen_moons: n_per_class must be positive");
    Rng rng(seed);
    std::vector<LabeledSample> out;
    out.reserve(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        for (std::size_t label : {0u, 1u}) {
            const double t = rng.uniform(0.0, std::numbers::pi);
            Vector x = label == 1 ? Vector{std::cos(t), std::sin(t)} : Vector{1.0 - std::cos(t), 0.5 - std::sin(t)};
            if (noise_sigma > 0.0) {
                x[0] += noise_sigma * rng.normal();
                x[1] += noise_sigma * rng.normal();
            }
            out.push_back({std::move(x), label});
        }
    }
    rng.shuffle(out);
    return out;
}

std::vector<Vector> rotate(const std::vector<Vector>& points, double degrees) {
    if (points.empty()) return {};
    double cx = 0.0, cy = 0.0;
    for (const auto& p : points) {
        if (p.size() != 2) throw DataError("rotate: expected 2-D points, got dimension " + std::to_string(p.size()));
        cx += p[0];
        cy += p[1];
    }
    cx /= static_cast<double>(points.size());
    cy /= static_cast<double>(points.size());
    if (std::fmod(degrees, 360.0) == 0.0) return points;
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    std::vector<Vector> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        const double dx = p[0] - cx, dy = p[1] - cy;
        out.push_back({cx + cs * dx - sn * dy, cy + sn * dx + cs * dy});
    }
    return out;
}

DomainDataset make_moons_task(const MoonsTaskOptions& options) {
    if (options.n_source_per_class == 0 || options.n_target == 0) {
        throw DataError("make_moons_task: sample sizes must be positive");
    }
    DomainDataset ds;
    ds.num_classes = 2;
    ds.feature_dim = 2;
    ds.source = gen_moons(options.n_source_per_class, options.noise, Rng::stream(options.seed, "source").next());

    auto shifted = gen_moons((options.n_target + 1) / 2, options.noise, Rng::stream(options.seed, "target").next());
    shifted.resize(options.n_target);
    std::vector<std::size_t> truth;
    truth.reserve(shifted.size());
    for (const auto& s : shifted) truth.push_back(s.y);
    ds.target = rotate(features_of(shifted), options.degrees);
    ds.target_truth = TargetTruth(std::move(truth));
    return ds;
}

bool RecordSet::fully_labeled() const {
    return std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
}

std::vector<LabeledSample> RecordSet::labeled() const {
    std::vector<LabeledSample> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!labels[i]) throw DataError("record " + std::to_string(i + 1) + " is unlabeled");
        out.push_back({x[i], *labels[i]});
    }
    return out;
}

RecordSet parse_sparse(std::istream& in, const SparseOptions& options) {
    struct Entry {
        std::size_t index;
        double value;
    };
    std::vector<std::vector<Entry>> rows;
    std::vector<std::size_t> row_lines;
    RecordSet out;
    std::optional<std::size_t> declared = options.dim;
    std::size_t max_index_plus_one = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            const auto comment = trim(body.substr(1));
            if (!declared && comment.starts_with("dim=")) {
                std::size_t d = 0;
                if (parse_int(trim(comment.substr(4)), d) && d > 0) declared = d;
            }
            continue;
        }
        const auto tokens = split_ws(body);
        out.labels.push_back(parse_label(tokens.front(), line_no));
        std::vector<Entry> entries;
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto tok = tokens[t];
            const auto colon = tok.find(':');
            long long idx = 0;
            double value = 0.0;
            if (colon == std::string_view::npos || !parse_int(tok.substr(0, colon), idx) ||
                !parse_double(tok.substr(colon + 1), value)) {
                throw DataError("malformed feature '" + std::string(tok) + "' at line " + std::to_string(line_no),
                                line_no);
            }
            idx -= options.index_base;
            if (idx < 0) {
                throw DataError("index out of range at line " + std::to_string(line_no), line_no);
            }
            const auto uidx = static_cast<std::size_t>(idx);
            max_index_plus_one = std::max(max_index_plus_one, uidx + 1);
            entries.push_back({uidx, value});
        }
        rows.push_back(std::move(entries));
        row_lines.push_back(line_no);
    }

    out.dim = declared.value_or(max_index_plus_one);
    out.x.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Vector x(out.dim, 0.0);
        for (const auto& e : rows[r]) {
            if (e.index >= out.dim) {
                throw DataError("index out of range at line " + std::to_string(row_lines[r]), row_lines[r]);
            }
            x[e.index] = e.value;
        }
        out.x.push_back(std::move(x));
    }
    return out;
}

RecordSet load_sparse(const std::filesystem::path& path, const SparseOptions& options) {
    auto in = open_for_read(path);
    return parse_sparse(in, options);
}

void write_sparse(std::ostream& out, const RecordSet& records) {
    out << "# dim=" << records.dim << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records.labels[i]) {
            out << *records.labels[i];
        } else {
            out << '?';
        }
        const auto& x = records.x[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] != 0.0) out << ' ' << j << ':' << format_double(x[j]);
        }
        out << '\n';
    }
}

void save_sparse(const std::filesystem::path& path, const RecordSet& records) {
    auto out = open_for_write(path);
    write_sparse(out, records);
    if (!out) throw IoError("failed writing " + path.string(), IoError::Kind::write);
}

RecordSet parse_csv(std::istream& in, const CsvOptions& options) {
    RecordSet out;
    std::string line;
    std::size_t line_no = 0;
    bool skipped_header = !options.header;
    std::optional<std::size_t> width;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            cells.push_back(trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!width) width = cells.size();
        if (cells.size() != *width) {
            throw DataError("expected " + std::to_string(*width) + " columns at line " + std::to_string(line_no) +
                                ", got " + std::to_string(cells.size()),
                            line_no);
        }
        std::size_t first = 0;
        if (options.label_first) {
            out.labels.push_back(parse_label(cells.front(), line_no));
            first = 1;
        } else {
            out.labels.push_back(std::nullopt);
        }
        Vector x;
        x.reserve(cells.size() - first);
        for (std::size_t c = first; c < cells.size(); ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                throw DataError("malformed value '" + std::string(cells[c]) + "' at line " + std::to_string(line_no),
                                line_no);
            }
            x.push_back(v);
        }
        out.x.push_back(std::move(x));
    }
    out.dim = out.x.empty() ? 0 : out.x.front().size();
    return out;
}

RecordSet load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    auto in = open_for_read(path);
    return parse_csv(in, options);
}

void write_csv(std::ostream& out, const RecordSet& records, const CsvOptions& options) {
    if (options.header) {
        bool first = true;
        if (options.label_first) {
            out << "label";
            first = false;
        }
        for (std::size_t j = 0; j < records.dim; ++j) {
            out << (first ? "" : ",") << 'x' << j;
            first = false;
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool first = true;
        if (options.label_first) {
            if (records.labels[i]) {
                out << *records.labels[i];
            } else {
                out << '?';
            }
            first = false;
        }
        for (double v : records.x[i]) {
            out << (first ? "" : ",") << format_double(v);
            first = false;
        }
        out << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const RecordSet& records, const CsvOptions& options) {
    auto out = open_for_write(path);
    write_csv(out, records, options);
    if (!out) throw IoError("failed writing " + path.string(), IoError::Kind::write);
}

RecordSet to_records(const std::vector<LabeledSample>& samples, std::size_t dim) {
    RecordSet out;
    out.dim = dim;
    for (const auto& s : samples) {
        out.x.push_back(s.x);
        out.labels.emplace_back(s.y);
    }
    return out;
}

RecordSet to_records(const std::vector<Vector>& points, std::size_t dim) {
    RecordSet out;
    out.dim = dim;
    out.x = points;
    out.labels.assign(points.size(), std::nullopt);
    return out;
}

std::pair<DomainDataset, Vector> mean_center(const DomainDataset& dataset) {
    if (dataset.source.empty()) throw DataError("mean_center: empty source sample");
    const std::size_t dim = dataset.source.front().x.size();
    Vector mean(dim, 0.0);
    for (const auto& s : dataset.source) axpy(1.0, s.x, mean);
    for (double& m : mean) m /= static_cast<double>(dataset.source.size());

    DomainDataset out = dataset;
    for (auto& s : out.source) axpy(-1.0, mean, s.x);
    for (auto& x : out.target) axpy(-1.0, mean, x);
    return {std::move(out), std::move(mean)};
}

} // namespace dann
