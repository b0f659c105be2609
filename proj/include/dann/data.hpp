#pragma once

#include "dann/numerics.hpp"
#include "dann/random.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dann {

/// Malformed or inconsistent input data. `line()` is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    enum class Kind { read, write };
    IoError(const std::string& what, Kind kind) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct LabeledSample {
    Vector x;
    std::size_t y = 0;

    bool operator==(const LabeledSample&) const = default;
};

struct DomainDataset;

/// Ground-truth labels of the target sample. Only the evaluation helpers below
/// can read them; training code receives the dataset but has no accessor.
class TargetTruth {
public:
    TargetTruth() = default;
    explicit TargetTruth(std::vector<std::size_t> labels) : labels_(std::move(labels)) {}

    bool empty() const { return labels_.empty(); }
    std::size_t size() const { return labels_.size(); }

private:
    std::vector<std::size_t> labels_;

    friend std::vector<LabeledSample> labeled_target(const DomainDataset& dataset);
};

/// Labeled source sample S and unlabeled target sample T. Source examples carry
/// domain label 0 and target examples domain label 1.
struct DomainDataset {
    std::vector<LabeledSample> source;
    std::vector<Vector> target;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    TargetTruth target_truth;

    /// Throws DataError when sizes, dimensions or labels are inconsistent.
    void validate() const;
};

/// Target sample joined with its hidden labels. Evaluation use only; throws
/// DataError when the dataset carries no target truth.
std::vector<LabeledSample> labeled_target(const DomainDataset& dataset);

std::vector<Vector> features_of(const std::vector<LabeledSample>& samples);
std::size_t count_classes(const std::vector<LabeledSample>& samples);

// Inter-twinning moons.

/// 2·n_per_class points in shuffled order. Label 1 lies on (cos t, sin t) and
/// label 0 on (1 - cos t, 0.5 - sin t), t ~ U[0, π], plus isotropic Gaussian noise.
std::vector<LabeledSample> gen_moons(std::size_t n_per_class, double noise_sigma, std::uint64_t seed);

/// Rotates 2-D points by `degrees` (counter-clockwise) about their centroid.
std::vector<Vector> rotate(const std::vector<Vector>& points, double degrees);

struct MoonsTaskOptions {
    std::size_t n_source_per_class = 150;
    std::size_t n_target = 300;
    double degrees = 35.0;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

/// Source moons plus an independently drawn, rotated and unlabeled target sample.
DomainDataset make_moons_task(const MoonsTaskOptions& options);

// File formats.

/// Shortest decimal string that reads back to exactly `v`.
std::string format_double(double v);

/// Feature vectors with optional labels, as read from disk.
struct RecordSet {
    std::vector<Vector> x;
    std::vector<std::optional<std::size_t>> labels;
    std::size_t dim = 0;

    std::size_t size() const { return x.size(); }
    bool fully_labeled() const;
    /// Throws DataError if any record is unlabeled.
    std::vector<LabeledSample> labeled() const;
};

struct SparseOptions {
    /// Declared dimension. When absent, a `# dim=N` comment or the largest index decides.
    std::optional<std::size_t> dim;
    /// 0 for 0-based indices, 1 for 1-based files.
    int index_base = 0;
};

/// `label idx:value ...` per line; label `?` marks an unlabeled record; `#` starts a comment.
RecordSet parse_sparse(std::istream& in, const SparseOptions& options = {});
RecordSet load_sparse(const std::filesystem::path& path, const SparseOptions& options = {});
void write_sparse(std::ostream& out, const RecordSet& records);
void save_sparse(const std::filesystem::path& path, const RecordSet& records);

struct CsvOptions {
    bool header = false;
    bool label_first = true;
};

RecordSet parse_csv(std::istream& in, const CsvOptions& options = {});
RecordSet load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
void write_csv(std::ostream& out, const RecordSet& records, const CsvOptions& options = {});
void save_csv(const std::filesystem::path& path, const RecordSet& records, const CsvOptions& options = {});

RecordSet to_records(const std::vector<LabeledSample>& samples, std::size_t dim);
RecordSet to_records(const std::vector<Vector>& points, std::size_t dim);

// Splits and preprocessing.

struct SplitSpec {
    double train_fraction = 0.9;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then cut at ⌊fraction·n⌋. Throws DataError if either side is empty.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& items, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw DataError("split: train fraction must lie strictly inside (0, 1)");
    }
    if (items.size() < 2) throw DataError("split: need at least 2 samples");
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    const auto cut = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(items.size()));
    if (cut == 0 || cut == items.size()) {
        throw DataError("split: fraction " + std::to_string(spec.train_fraction) + " of " +
                        std::to_string(items.size()) + " samples leaves an empty side");
    }
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(cut);
    out.second.reserve(items.size() - cut);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? out.first : out.second).push_back(items[order[i]]);
    }
    return out;
}

/// Subtracts the source-feature mean from source and target features.
std::pair<DomainDataset, Vector> mean_center(const DomainDataset& dataset);

} // namespace dann
