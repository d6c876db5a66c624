#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "prelu/network.hpp"

namespace prelu {

enum class Sense { kPositive, kNonPositive };  // "> 0" and "<= 0"

/// omega . x + beta compared against zero.
struct Halfspace {
  Vector omega;
  double beta = 0.0;
  Sense sense = Sense::kPositive;

  double value(const Eigen::Ref<const Vector>& x) const { return omega.dot(x) + beta; }
  bool contains(const Eigen::Ref<const Vector>& x) const {
    const double v = value(x);
    return sense == Sense::kPositive ? v > 0.0 : v <= 0.0;
  }
  /// Unit-free distance of x to the boundary, |omega . x + beta|.
  double margin(const Eigen::Ref<const Vector>& x) const { return std::abs(value(x)); }
};

/// x -> weights * x + offset.
template <typename Scalar>
struct BasicAffineMap {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> offset;

  static BasicAffineMap identity(Index d) {
    return {decltype(weights)::Identity(d, d), decltype(offset)::Zero(d)};
  }
  template <typename Derived>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> operator()(const Eigen::MatrixBase<Derived>& x) const {
    return weights * x + offset;
  }
};

using AffineMap = BasicAffineMap<double>;

/// Affine form of a layer's pre-activations given the affine form of its input.
template <typename Scalar>
BasicAffineMap<Scalar> compose(const BasicLayer<Scalar>& layer, const BasicAffineMap<Scalar>& in) {
  return {layer.W * in.weights, layer.W * in.offset + layer.b};
}

/// Zeroes the rows of inactive ReLU neurons; `bits` covers the layer's ReLU
/// neurons in order.
template <typename Scalar>
BasicAffineMap<Scalar> mask(const BasicLayer<Scalar>& layer, BasicAffineMap<Scalar> pre,
                            const std::vector<bool>& bits) {
  std::size_t k = 0;
  for (Index j = 0; j < layer.outputs(); ++j) {
    if (!layer.is_relu(j)) continue;
    if (!bits[k++]) {
      pre.weights.row(j).setZero();
      pre.offset(j) = Scalar(0);
    }
  }
  return pre;
}

/// A rule's state inside a region.
struct RuleCondition {
  int index = 0;  // position among the network's rules
  Rule rule;
  bool active = false;
  bool holds(const Eigen::Ref<const Vector>& x) const { return rule.indicator(x) == active; }
};

/// Linear region for one activation pattern. With rules attached, the pattern
/// is prefixed by one indicator bit per rule.
struct Region {
  ActivationPattern pattern;
  std::vector<Halfspace> halfspaces;
  std::vector<RuleCondition> rule_conditions;
  AffineMap outputs;  // K x d weights, K offsets (rule offsets included)
  Index support_count = 0;

  bool contains(const Eigen::Ref<const Vector>& x) const;
};

/// Region refined to the points that receive `treatment`.
struct TreatmentCell {
  int treatment = 0;
  std::vector<Halfspace> comparisons;

  /// Checks only the comparison halfspaces, not the parent region.
  bool contains(const Eigen::Ref<const Vector>& x) const;
};

/// Rule indicator bits followed by the ReLU activation bits.
ActivationPattern region_pattern(const Network& net, const Eigen::Ref<const Vector>& x);

/// Distinct region patterns realized by the columns of `points`, with counts,
/// ordered lexicographically.
std::map<ActivationPattern, Index> enumerate_patterns(const Network& net, const Matrix& points);

/// Halfspace description and output maps of the region for `pattern`.
Region region_halfspaces(const Network& net, const ActivationPattern& pattern);

/// K cells; cell i holds f_i <= f_j for j > i and f_i < f_j for j < i, so
/// ties go to the lowest index.
std::vector<TreatmentCell> treatment_cells(const Region& region);

/// All regions realized by `points`, support counts filled in.
std::vector<Region> partition(const Network& net, const Matrix& points);

nlohmann::json to_json(const Halfspace& h);
nlohmann::json region_report(const std::vector<Region>& regions);

}  // namespace prelu
