#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prelu/data.hpp"
#include "prelu/network.hpp"
#include "prelu/rule.hpp"

namespace prelu {

inline constexpr double kDefaultBigM = 1000.0;

/// 1 iff every row of the rule holds strictly at x.
int indicator(const Rule& rule, const Eigen::Ref<const Vector>& x);

/// Attaches the rule's big-M path to the network outputs. Rules compose
/// additively. A rule that allows every treatment is still attached but
/// logs a warning.
Network inject_rule(Network net, const Rule& rule);

/// Per-feature closed interval.
struct InputBounds {
  Vector lo;
  Vector hi;
};

/// Output range of the network over the box by interval arithmetic, ignoring
/// attached rules.
std::pair<double, double> output_range(const Network& net, const InputBounds& bounds);

/// hi - lo of output_range, floored at 1.
double compute_big_m(const Network& net, const InputBounds& bounds);

struct FilterResult {
  ObservationalData kept;
  ObservationalData removed;
};

/// A sample is removed iff some rule fires on it while excluding its treatment.
FilterResult filter_violating(const ObservationalData& data, const std::vector<Rule>& rules);

enum class TransformOp { kSquare, kLog, kProduct };

/// A derived feature appended after the raw ones.
struct FeatureTransform {
  std::string name;
  TransformOp op = TransformOp::kSquare;
  std::vector<int> args;  // 0-based indices into the features built so far
};

using FeatureTransformSpec = std::vector<FeatureTransform>;

/// Raw features followed by each derived feature in order. A derived feature
/// may reference earlier derived ones. `sample` is only used in diagnostics.
Vector apply_transforms(const FeatureTransformSpec& spec, const Eigen::Ref<const Vector>& x,
                        Index sample = -1);

/// Column-wise over X (d x n).
Matrix apply_transforms_all(const FeatureTransformSpec& spec, const Matrix& X);

/// Rules plus transforms as read from a rule file.
struct RuleSet {
  std::vector<Rule> rules;
  FeatureTransformSpec transforms;
};

std::string transform_op_name(TransformOp op);
TransformOp parse_transform_op(const std::string& name);

}  // namespace prelu
