#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prelu/constraints.hpp"
#include "prelu/network.hpp"

namespace prelu {

/// The K(K-1)/2 pairwise differences f_i - f_j (i < j) of the output layer.
struct DiffHead {
  std::vector<std::pair<int, int>> pairs;  // lexicographic
  Matrix weights;                          // P x N_L: W_i - W_j
  Vector bias;                             // P: b_i - b_j

  static DiffHead from_network(const Network& net);
  Index size() const { return static_cast<Index>(pairs.size()); }
};

/// Maps the pairwise sign bits (bit q set iff f_i - f_j > 0 for pair q) to a
/// treatment: the lowest i with f_j > f_i for all j < i and f_i <= f_j for all
/// j > i. That is argmin with lowest-index ties whenever the bits come from
/// real outputs; other bit combinations map to the treatment with the fewest
/// violated comparisons.
int decode_pairs(int num_treatments, const std::vector<bool>& bits);

/// Network whose output is a function of its activation pattern alone: the
/// hidden layers of the source network followed by the pairwise difference
/// head, decoded by decode_pairs.
struct LocallyConstantNetwork {
  Network net;  // hidden layers and rules are used; the output layer is kept for reference
  DiffHead head;

  std::vector<bool> pair_bits(const Eigen::Ref<const Vector>& x) const;
  int predict(const Eigen::Ref<const Vector>& x) const;
};

LocallyConstantNetwork to_locally_constant(const Network& net);

/// Where an internal node's split comes from.
struct NodeSource {
  enum class Kind { kNeuron, kPair, kConstraint };
  Kind kind = Kind::kNeuron;
  int first = 0;   // layer, left treatment, or rule index
  int second = 0;  // neuron within layer, right treatment, unused

  std::string to_string() const;
  static NodeSource parse(const std::string& s);
  friend bool operator==(const NodeSource&, const NodeSource&) = default;
};

/// Internal nodes route right iff omega . x + beta > 0 (constraint nodes:
/// iff the rule fires). Leaves carry a treatment.
struct TreeNode {
  int id = 0;
  bool leaf = false;
  Vector omega;
  double beta = 0.0;
  NodeSource source;
  int left = -1;
  int right = -1;
  int treatment = 0;
};

class ObliqueTree {
 public:
  Index input_dim = 0;
  Index num_treatments = 0;
  std::vector<TreeNode> nodes;  // nodes[i].id == i
  int root = 0;
  std::vector<Rule> rules;      // referenced by constraint nodes

  int predict(const Eigen::Ref<const Vector>& x) const;

  /// Prediction and the smallest |split value| met on the path.
  std::pair<int, double> predict_with_margin(const Eigen::Ref<const Vector>& x) const;

  int depth() const;
  Index num_leaves() const;
  Index num_internal() const;
};

enum class ExtractMode { kExact, kDataDriven };

/// Largest N + K(K-1)/2 accepted by exact extraction.
inline constexpr Index kExactSizeGuard = 25;

struct ExtractOptions {
  ExtractMode mode = ExtractMode::kExact;
  const Matrix* calibration = nullptr;    // required by data-driven mode (d x n)
  std::optional<InputBounds> bounds;      // exact mode: prune branches empty on this box
};

/// Oblique tree equivalent to the network. Split order: rule indicators,
/// ReLU neurons layer-major, then pairs (i, j) lexicographically. Data-driven
/// mode first prunes neurons on the calibration points and then drops every
/// split that sends all calibration points the same way.
ObliqueTree extract_tree(const Network& net, const ExtractOptions& options);

int tree_predict(const ObliqueTree& tree, const Eigen::Ref<const Vector>& x);

std::string export_dot(const ObliqueTree& tree);
nlohmann::json tree_to_json(const ObliqueTree& tree);
ObliqueTree tree_from_json(const nlohmann::json& j);

struct EquivalenceReport {
  Index checked = 0;
  Index mismatches = 0;
  Index boundary = 0;  // excluded: within kBoundaryTolerance of a split on the path
};

/// Compares prescribe(forward(net, x)) with the tree on every column.
EquivalenceReport verify_equivalence(const Network& net, const ObliqueTree& tree, const Matrix& points);

}  // namespace prelu
