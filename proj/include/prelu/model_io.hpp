#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "prelu/constraints.hpp"
#include "prelu/datagen.hpp"
#include "prelu/network.hpp"

namespace prelu {

/// A network together with what is needed to reproduce its inputs: feature
/// transforms applied before the first layer, outcome standardization of the
/// data it was trained on, and the training seed.
struct Model {
  Network net;
  FeatureTransformSpec transforms;
  std::optional<Standardization> standardization;
  std::uint64_t seed = 0;

  /// Raw features (d_raw x n) to network inputs.
  Matrix prepare(const Matrix& raw) const { return apply_transforms_all(transforms, raw); }
};

nlohmann::json rule_to_json(const Rule& rule);
Rule rule_from_json(const nlohmann::json& j);

nlohmann::json transform_to_json(const FeatureTransform& t);
FeatureTransform transform_from_json(const nlohmann::json& j);

/// {rules:[{A, b, allowed, M?}], transforms:[{name, op, args}]}. A missing M
/// means the default big-M.
RuleSet rule_set_from_json(const nlohmann::json& j);
nlohmann::json rule_set_to_json(const RuleSet& rules);

nlohmann::json model_to_json(const Model& model);

/// Validates shapes and finiteness; throws ParseError on any schema problem.
Model model_from_json(const nlohmann::json& j);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
RuleSet load_rule_set(const std::filesystem::path& path);

}  // namespace prelu
