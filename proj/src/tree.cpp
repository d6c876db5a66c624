#include "prelu/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "prelu/loss.hpp"
#include "prelu/model_io.hpp"
#include "prelu/partition.hpp"
#include "prelu/trainer.hpp"

namespace prelu {

DiffHead DiffHead::from_network(const Network& net) {
  const Index K = net.num_treatments();
  if (K < 2) throw ContractError("locally constant conversion needs K >= 2");
  DiffHead head;
  const Layer& out = net.output();
  for (int i = 0; i < K; ++i) {
    for (int j = i + 1; j < K; ++j) head.pairs.emplace_back(i, j);
  }
  head.weights.resize(head.size(), out.W.cols());
  head.bias.resize(head.size());
  for (Index q = 0; q < head.size(); ++q) {
    const auto [i, j] = head.pairs[static_cast<std::size_t>(q)];
    head.weights.row(q) = out.W.row(i) - out.W.row(j);
    head.bias(q) = out.b(i) - out.b(j);
  }
  return head;
}

int decode_pairs(int num_treatments, const std::vector<bool>& bits) {
  const int K = num_treatments;
  if (K < 2) throw ContractError("decode_pairs: K must be >= 2");
  if (bits.size() != static_cast<std::size_t>(K * (K - 1) / 2)) {
    throw ShapeError("decode_pairs: expected K(K-1)/2 bits");
  }
  // Pair (i, j), i < j, sits at offset i*K - i(i+1)/2 + (j - i - 1).
  auto bit = [&](int i, int j) {
    return bits[static_cast<std::size_t>(i * K - i * (i + 1) / 2 + (j - i - 1))];
  };
  int best = 0;
  int best_violations = std::numeric_limits<int>::max();
  for (int t = 0; t < K; ++t) {
    int violations = 0;
    for (int j = 0; j < t; ++j) violations += bit(j, t) ? 0 : 1;   // need f_j > f_t
    for (int j = t + 1; j < K; ++j) violations += bit(t, j) ? 1 : 0;  // need f_t <= f_j
    if (violations == 0) return t;
    if (violations < best_violations) {
      best = t;
      best_violations = violations;
    }
  }
  return best;
}

std::vector<bool> LocallyConstantNetwork::pair_bits(const Eigen::Ref<const Vector>& x) const {
  const auto cache = forward_batch(net, x);
  const Vector last = cache.post.back().col(0);
  Vector diff = head.weights * last + head.bias;
  const Vector offsets = cache.outputs.col(0) - cache.pre.back().col(0);
  std::vector<bool> bits;
  for (Index q = 0; q < head.size(); ++q) {
    const auto [i, j] = head.pairs[static_cast<std::size_t>(q)];
    bits.push_back(diff(q) + offsets(i) - offsets(j) > 0.0);
  }
  return bits;
}

int LocallyConstantNetwork::predict(const Eigen::Ref<const Vector>& x) const {
  return decode_pairs(static_cast<int>(net.num_treatments()), pair_bits(x));
}

LocallyConstantNetwork to_locally_constant(const Network& net) {
  return {net, DiffHead::from_network(net)};
}

std::string NodeSource::to_string() const {
  switch (kind) {
    case Kind::kNeuron: return "neuron:" + std::to_string(first) + ":" + std::to_string(second);
    case Kind::kPair: return "pair:" + std::to_string(first) + ":" + std::to_string(second);
    case Kind::kConstraint: return "constraint:" + std::to_string(first);
  }
  return {};
}

NodeSource NodeSource::parse(const std::string& s) {
  NodeSource src;
  int a = 0, b = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "neuron:%d:%d%c", &a, &b, &tail) == 2) {
    src = {Kind::kNeuron, a, b};
  } else if (std::sscanf(s.c_str(), "pair:%d:%d%c", &a, &b, &tail) == 2) {
    src = {Kind::kPair, a, b};
  } else if (std::sscanf(s.c_str(), "constraint:%d%c", &a, &tail) == 1) {
    src = {Kind::kConstraint, a, 0};
  } else {
    throw ParseError("bad node source '" + s + "'");
  }
  return src;
}

namespace {

double split_value(const TreeNode& node, const std::vector<Rule>& rules,
                   const Eigen::Ref<const Vector>& x) {
  if (node.source.kind == NodeSource::Kind::kConstraint) {
    return rules.at(static_cast<std::size_t>(node.source.first)).margin(x);
  }
  return node.omega.dot(x) + node.beta;
}

class Builder {
 public:
  Builder(const Network& net, const ExtractOptions& options, ObliqueTree& tree)
      : net_(net), options_(options), tree_(tree) {}

  struct State {
    std::vector<bool> rule_bits;
    Index layer = 0;
    Index neuron = 0;
    AffineMap in;
    AffineMap pre;
    std::vector<bool> layer_bits;
    bool outputs_ready = false;
    AffineMap out;
    std::vector<bool> pair_bits;
    std::vector<Index> points;
  };

  State initial_state() const {
    State s;
    s.in = AffineMap::identity(net_.input_dim());
    if (net_.num_hidden_layers() > 0) s.pre = compose(net_.layer(0), s.in);
    if (options_.calibration) {
      s.points.resize(static_cast<std::size_t>(options_.calibration->cols()));
      for (std::size_t i = 0; i < s.points.size(); ++i) s.points[i] = static_cast<Index>(i);
    }
    return s;
  }

  int build(State s) {
    const std::size_t num_rules = net_.rules().size();
    if (s.rule_bits.size() < num_rules) {
      const std::size_t r = s.rule_bits.size();
      const Rule& rule = net_.rules()[r];
      return split(std::move(s), rule.A.row(0).transpose(), -rule.b(0),
                   {NodeSource::Kind::kConstraint, static_cast<int>(r), 0},
                   [](State& st, bool bit) { st.rule_bits.push_back(bit); });
    }
    advance_hidden(s);
    if (s.layer < net_.num_hidden_layers()) {
      const Index l = s.layer, j = s.neuron;
      Vector omega = s.pre.weights.row(j).transpose();
      const double beta = s.pre.offset(j);
      return split(std::move(s), std::move(omega), beta,
                   {NodeSource::Kind::kNeuron, static_cast<int>(l), static_cast<int>(j)},
                   [](State& st, bool bit) {
                     st.layer_bits.push_back(bit);
                     ++st.neuron;
                   });
    }
    if (!s.outputs_ready) {
      s.out = compose(net_.output(), s.in);
      for (std::size_t r = 0; r < num_rules; ++r) {
        if (!s.rule_bits[r]) continue;
        const Rule& rule = net_.rules()[r];
        for (Index p = 0; p < net_.num_treatments(); ++p) {
          if (!rule.allows(static_cast<int>(p))) s.out.offset(p) += rule.big_m;
        }
      }
      s.outputs_ready = true;
    }
    const std::size_t q = s.pair_bits.size();
    const auto& pairs = head_pairs();
    if (q == pairs.size()) return leaf(decode_pairs(static_cast<int>(net_.num_treatments()), s.pair_bits));
    const auto [i, j] = pairs[q];
    Vector omega = (s.out.weights.row(i) - s.out.weights.row(j)).transpose();
    const double beta = s.out.offset(i) - s.out.offset(j);
    return split(std::move(s), std::move(omega), beta, {NodeSource::Kind::kPair, i, j},
                 [](State& st, bool bit) { st.pair_bits.push_back(bit); });
  }

 private:
  const std::vector<std::pair<int, int>>& head_pairs() {
    if (pairs_.empty()) {
      for (int i = 0; i < net_.num_treatments(); ++i) {
        for (int j = i + 1; j < net_.num_treatments(); ++j) pairs_.emplace_back(i, j);
      }
    }
    return pairs_;
  }

  // Moves to the next undecided ReLU neuron, closing finished layers.
  void advance_hidden(State& s) const {
    while (s.layer < net_.num_hidden_layers()) {
      const Layer& layer = net_.layer(s.layer);
      if (s.neuron == layer.outputs()) {
        s.in = mask(layer, std::move(s.pre), s.layer_bits);
        s.layer_bits.clear();
        s.neuron = 0;
        ++s.layer;
        if (s.layer < net_.num_hidden_layers()) s.pre = compose(net_.layer(s.layer), s.in);
        continue;
      }
      if (!layer.is_relu(s.neuron)) {
        ++s.neuron;
        continue;
      }
      return;
    }
  }

  int leaf(int treatment) {
    TreeNode node;
    node.id = static_cast<int>(tree_.nodes.size());
    node.leaf = true;
    node.treatment = treatment;
    tree_.nodes.push_back(std::move(node));
    return tree_.nodes.back().id;
  }

  // Which sides of a split can be reached: {left, right}.
  std::pair<bool, bool> reachable(const Vector& omega, double beta, const NodeSource& src) const {
    if (!options_.bounds) return {true, true};
    const InputBounds& box = *options_.bounds;
    auto range = [&](const Vector& w, double c) {
      const double lo = c + (w.array() * box.lo.array()).min(w.array() * box.hi.array()).sum();
      const double hi = c + (w.array() * box.lo.array()).max(w.array() * box.hi.array()).sum();
      return std::pair{lo, hi};
    };
    if (src.kind == NodeSource::Kind::kConstraint) {
      const Rule& rule = net_.rules()[static_cast<std::size_t>(src.first)];
      bool can_fire = true, can_fail = false;
      for (Index r = 0; r < rule.rows(); ++r) {
        const auto [lo, hi] = range(rule.A.row(r).transpose(), -rule.b(r));
        can_fire = can_fire && hi > 0.0;
        can_fail = can_fail || lo <= 0.0;
      }
      return {can_fail, can_fire};
    }
    const auto [lo, hi] = range(omega, beta);
    return {lo <= 0.0, hi > 0.0};
  }

  template <typename Apply>
  int split(State s, Vector omega, double beta, NodeSource src, Apply apply) {
    if (options_.mode == ExtractMode::kDataDriven) {
      const Matrix& X = *options_.calibration;
      std::vector<Index> left, right;
      for (Index t : s.points) {
        const Vector x = X.col(t);
        const bool go_right = src.kind == NodeSource::Kind::kConstraint
                                  ? net_.rules()[static_cast<std::size_t>(src.first)].indicator(x)
                                  : omega.dot(x) + beta > 0.0;
        (go_right ? right : left).push_back(t);
      }
      if (left.empty() || right.empty()) {
        apply(s, !right.empty());
        return build(std::move(s));
      }
      const int id = new_split(std::move(omega), beta, src);
      State ls = s;
      ls.points = std::move(left);
      apply(ls, false);
      const int l = build(std::move(ls));
      s.points = std::move(right);
      apply(s, true);
      const int r = build(std::move(s));
      link(id, l, r);
      return id;
    }

    const auto [left_ok, right_ok] = reachable(omega, beta, src);
    const int id = new_split(std::move(omega), beta, src);
    const int fallback = decode_pairs(static_cast<int>(net_.num_treatments()), padded(s.pair_bits));
    State ls = s;
    apply(ls, false);
    const int l = left_ok ? build(std::move(ls)) : leaf(fallback);
    apply(s, true);
    const int r = right_ok ? build(std::move(s)) : leaf(fallback);
    link(id, l, r);
    return id;
  }

  std::vector<bool> padded(std::vector<bool> bits) {
    bits.resize(head_pairs().size(), false);
    return bits;
  }

  int new_split(Vector omega, double beta, NodeSource src) {
    TreeNode node;
    node.id = static_cast<int>(tree_.nodes.size());
    node.omega = std::move(omega);
    node.beta = beta;
    node.source = src;
    tree_.nodes.push_back(std::move(node));
    return tree_.nodes.back().id;
  }

  void link(int id, int left, int right) {
    tree_.nodes[static_cast<std::size_t>(id)].left = left;
    tree_.nodes[static_cast<std::size_t>(id)].right = right;
  }

  const Network& net_;
  const ExtractOptions& options_;
  ObliqueTree& tree_;
  std::vector<std::pair<int, int>> pairs_;
};

std::string format_coef(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string affine_label(const Vector& omega, double beta) {
  std::ostringstream out;
  bool first = true;
  for (Index k = 0; k < omega.size(); ++k) {
    if (std::abs(omega(k)) < 0.005) continue;
    const double c = omega(k);
    if (first) {
      out << (c < 0 ? "-" : "");
    } else {
      out << (c < 0 ? " - " : " + ");
    }
    out << format_coef(std::abs(c)) << "*x" << (k + 1);
    first = false;
  }
  if (first) {
    out << format_coef(beta);
  } else if (std::abs(beta) >= 0.005) {
    out << (beta < 0 ? " - " : " + ") << format_coef(std::abs(beta));
  }
  out << " > 0";
  return out.str();
}

std::string rule_label(const Rule& rule) {
  std::ostringstream out;
  out << "M*(";
  for (Index r = 0; r < rule.rows(); ++r) {
    if (r > 0) out << " & ";
    const std::string lhs = affine_label(rule.A.row(r).transpose(), 0.0);
    out << lhs.substr(0, lhs.size() - 4) << " > " << format_coef(rule.b(r));
  }
  out << ")";
  return out.str();
}

std::vector<double> to_std(const Eigen::Ref<const Vector>& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

int ObliqueTree::predict(const Eigen::Ref<const Vector>& x) const { return predict_with_margin(x).first; }

std::pair<int, double> ObliqueTree::predict_with_margin(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != input_dim) {
    throw ShapeError("tree expects " + std::to_string(input_dim) + " features, got " +
                     std::to_string(x.size()));
  }
  double margin = std::numeric_limits<double>::infinity();
  int id = root;
  while (true) {
    const TreeNode& node = nodes.at(static_cast<std::size_t>(id));
    if (node.leaf) return {node.treatment, margin};
    const double v = split_value(node, rules, x);
    margin = std::min(margin, std::abs(v));
    id = v > 0.0 ? node.right : node.left;
  }
}

int ObliqueTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{root, 0}};
  int best = 0;
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    if (node.leaf) {
      best = std::max(best, d);
    } else {
      stack.push_back({node.left, d + 1});
      stack.push_back({node.right, d + 1});
    }
  }
  return best;
}

Index ObliqueTree::num_leaves() const {
  return std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; });
}

Index ObliqueTree::num_internal() const { return static_cast<Index>(nodes.size()) - num_leaves(); }

ObliqueTree extract_tree(const Network& source, const ExtractOptions& options) {
  ObliqueTree tree;
  tree.input_dim = source.input_dim();
  tree.num_treatments = source.num_treatments();
  tree.rules = source.rules();
  const Index pairs = source.num_treatments() * (source.num_treatments() - 1) / 2;

  Network net = source;
  if (options.mode == ExtractMode::kDataDriven) {
    if (!options.calibration || options.calibration->cols() == 0) {
      throw ContractError("data-driven extraction needs calibration points");
    }
    if (options.calibration->rows() != source.input_dim()) {
      throw ShapeError("calibration points have the wrong dimension");
    }
    net = prune_neurons(source, *options.calibration);
  } else if (net.num_relu() + pairs > kExactSizeGuard) {
    throw SizeError("exact tree would have depth " + std::to_string(net.num_relu() + pairs) +
                    " (> " + std::to_string(kExactSizeGuard) + "); use data-driven mode");
  }
  if (options.bounds && (options.bounds->lo.size() != net.input_dim() ||
                         options.bounds->hi.size() != net.input_dim())) {
    throw ShapeError("bounds must have one interval per feature");
  }

  Builder builder(net, options, tree);
  tree.root = builder.build(builder.initial_state());
  return tree;
}

int tree_predict(const ObliqueTree& tree, const Eigen::Ref<const Vector>& x) { return tree.predict(x); }

std::string export_dot(const ObliqueTree& tree) {
  std::ostringstream out;
  out << "digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto& node : tree.nodes) {
    if (node.leaf) {
      out << "  n" << node.id << " [label=\"prescribe: " << node.treatment
          << "\", shape=ellipse];\n";
      continue;
    }
    const std::string label =
        node.source.kind == NodeSource::Kind::kConstraint
            ? rule_label(tree.rules.at(static_cast<std::size_t>(node.source.first)))
            : affine_label(node.omega, node.beta);
    out << "  n" << node.id << " [label=\"" << label << "\"];\n";
    out << "  n" << node.id << " -> n" << node.left << " [label=\"no\"];\n";
    out << "  n" << node.id << " -> n" << node.right << " [label=\"yes\"];\n";
  }
  out << "}\n";
  return out.str();
}

nlohmann::json tree_to_json(const ObliqueTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json leaves = nlohmann::json::array();
  for (const auto& node : tree.nodes) {
    if (node.leaf) {
      leaves.push_back({{"id", node.id}, {"treatment", node.treatment}});
    } else {
      nodes.push_back({{"id", node.id},
                       {"omega", to_std(node.omega)},
                       {"beta", node.beta},
                       {"source", node.source.to_string()},
                       {"left_id", node.left},
                       {"right_id", node.right}});
    }
  }
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : tree.rules) rules.push_back(rule_to_json(r));
  return {{"d", tree.input_dim}, {"K", tree.num_treatments}, {"root_id", tree.root},
          {"nodes", nodes},      {"leaves", leaves},          {"rules", rules}};
}

ObliqueTree tree_from_json(const nlohmann::json& j) {
  try {
    ObliqueTree tree;
    tree.input_dim = j.at("d").get<Index>();
    tree.num_treatments = j.at("K").get<Index>();
    tree.root = j.at("root_id").get<int>();
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) tree.rules.push_back(rule_from_json(r));
    }
    const std::size_t total = j.at("nodes").size() + j.at("leaves").size();
    tree.nodes.resize(total);
    std::vector<bool> seen(total, false);
    auto claim = [&](int id) -> TreeNode& {
      if (id < 0 || static_cast<std::size_t>(id) >= total || seen[static_cast<std::size_t>(id)]) {
        throw ParseError("tree: node ids must be unique and dense");
      }
      seen[static_cast<std::size_t>(id)] = true;
      TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
      n.id = id;
      return n;
    };
    for (const auto& jn : j.at("nodes")) {
      TreeNode& n = claim(jn.at("id").get<int>());
      const auto omega = jn.at("omega").get<std::vector<double>>();
      if (static_cast<Index>(omega.size()) != tree.input_dim) throw ParseError("tree: omega length != d");
      n.omega = Eigen::Map<const Vector>(omega.data(), static_cast<Index>(omega.size()));
      n.beta = jn.at("beta").get<double>();
      n.source = NodeSource::parse(jn.at("source").get<std::string>());
      n.left = jn.at("left_id").get<int>();
      n.right = jn.at("right_id").get<int>();
    }
    for (const auto& jl : j.at("leaves")) {
      TreeNode& n = claim(jl.at("id").get<int>());
      n.leaf = true;
      n.treatment = jl.at("treatment").get<int>();
      if (n.treatment < 0 || n.treatment >= tree.num_treatments) {
        throw ParseError("tree: leaf treatment outside [0, K)");
      }
    }
    for (const auto& n : tree.nodes) {
      if (n.leaf) continue;
      for (int c : {n.left, n.right}) {
        if (c < 0 || static_cast<std::size_t>(c) >= total) throw ParseError("tree: dangling child id");
      }
      if (n.source.kind == NodeSource::Kind::kConstraint &&
          static_cast<std::size_t>(n.source.first) >= tree.rules.size()) {
        throw ParseError("tree: constraint node references a missing rule");
      }
    }
    if (tree.root < 0 || static_cast<std::size_t>(tree.root) >= total) throw ParseError("tree: bad root_id");
    // Every node must be reached exactly once from the root.
    std::vector<bool> reached(total, false);
    std::vector<int> stack{tree.root};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      if (reached[static_cast<std::size_t>(id)]) throw ParseError("tree: node " + std::to_string(id) + " has two parents");
      reached[static_cast<std::size_t>(id)] = true;
      const TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
      if (!n.leaf) {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    if (std::find(reached.begin(), reached.end(), false) != reached.end()) {
      throw ParseError("tree: unreachable nodes");
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tree: ") + e.what());
  }
}

EquivalenceReport verify_equivalence(const Network& net, const ObliqueTree& tree, const Matrix& points) {
  if (points.cols() == 0) throw ContractError("verify_equivalence: no points");
  EquivalenceReport rep;
  const auto chosen = prescribe_all(net, points);
  for (Index c = 0; c < points.cols(); ++c) {
    const auto [t, margin] = tree.predict_with_margin(points.col(c));
    if (margin < kBoundaryTolerance) {
      ++rep.boundary;
      continue;
    }
    ++rep.checked;
    if (t != chosen[static_cast<std::size_t>(c)]) ++rep.mismatches;
  }
  return rep;
}

}  // namespace prelu
