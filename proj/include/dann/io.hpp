#pragma once

#include "dann/grl_engine.hpp"
#include "dann/shallow_dann.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace dann::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

nlohmann::ordered_json to_json(const shallow::ShallowModel& model);
/// Throws DataError on a malformed document.
shallow::ShallowModel shallow_model_from_json(const json& doc);

nlohmann::ordered_json to_json(const grl::LayerGraph& graph, const std::vector<grl::DeepEpochRecord>& log = {});
grl::LayerGraph graph_from_json(const json& doc);
std::vector<grl::DeepEpochRecord> graph_log_from_json(const json& doc);

/// "shallow" or "graph"; throws DataError otherwise.
std::string model_kind(const json& doc);

/// Two-space indented, trailing newline. Doubles print as the shortest string
/// that reads back to the same value.
std::string dump(const nlohmann::ordered_json& doc);

json load_json(const std::filesystem::path& path);
void save_text(const std::filesystem::path& path, const std::string& text);

/// Architecture description, one stack per line:
///
///     feature = 15 logistic, 8 relu
///     label   = 2 softmax
///     domain  = 1 logistic
///
/// `#` starts a comment. Throws DataError naming the offending line.
grl::Architecture parse_architecture(std::istream& in, std::size_t input_dim);
grl::Architecture load_architecture(const std::filesystem::path& path, std::size_t input_dim);

/// FNV-1a over the little-endian bit patterns of (W, b, V, c).
std::uint64_t network_param_hash(const shallow::ShallowParams& params);
/// FNV-1a over the feature stack and label head parameters.
std::uint64_t network_param_hash(const grl::LayerGraph& graph);

std::string hex64(std::uint64_t v);

} // namespace dann::io
