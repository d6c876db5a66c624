#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prelu/errors.hpp"
#include "prelu/rule.hpp"

namespace prelu {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Absolute distance below which a point is treated as lying on a hyperplane.
inline constexpr double kBoundaryTolerance = 1e-9;

/// On/off state of every ReLU neuron, layer-major. Passthrough neurons
/// (see BasicLayer) carry no bit.
class ActivationPattern {
 public:
  ActivationPattern() = default;
  explicit ActivationPattern(std::vector<bool> bits) : bits_(std::move(bits)) {}

  static ActivationPattern from_string(std::string_view s) {
    std::vector<bool> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') throw ParseError("activation pattern must be a bit string");
      bits.push_back(c == '1');
    }
    return ActivationPattern(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void push_back(bool bit) { bits_.push_back(bit); }
  const std::vector<bool>& bits() const { return bits_; }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
  friend bool operator<(const ActivationPattern& a, const ActivationPattern& b) {
    return a.bits_ < b.bits_;
  }

 private:
  std::vector<bool> bits_;
};

/// One affine layer. For hidden layers `passthrough(j)` marks neuron j as
/// linear (identity activation); every other hidden neuron is a ReLU.
template <typename Scalar>
struct BasicLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W;
  Vector b;
  Eigen::Array<bool, Eigen::Dynamic, 1> passthrough;

  Index outputs() const { return W.rows(); }
  Index inputs() const { return W.cols(); }
  bool is_relu(Index j) const { return passthrough.size() == 0 || !passthrough(j); }
};

/// Dense feed-forward network: ReLU hidden layers, K linear outputs, plus
/// optional non-trainable big-M rule paths added to the outputs.
template <typename Scalar>
class BasicNetwork {
 public:
  using Layer = BasicLayer<Scalar>;
  using RuleType = BasicRule<Scalar>;

  BasicNetwork() = default;
  BasicNetwork(Index input_dim, std::vector<Layer> hidden, Layer output)
      : input_dim_(input_dim), hidden_(std::move(hidden)), output_(std::move(output)) {
    validate();
  }

  Index input_dim() const { return input_dim_; }
  Index num_treatments() const { return output_.W.rows(); }
  Index num_hidden_layers() const { return static_cast<Index>(hidden_.size()); }

  std::vector<Index> hidden_sizes() const {
    std::vector<Index> sizes;
    for (const auto& l : hidden_) sizes.push_back(l.outputs());
    return sizes;
  }

  /// Number of ReLU neurons, i.e. the length of an activation pattern.
  Index num_relu() const {
    Index n = 0;
    for (const auto& l : hidden_) {
      for (Index j = 0; j < l.outputs(); ++j) n += l.is_relu(j) ? 1 : 0;
    }
    return n;
  }

  const std::vector<Layer>& hidden() const { return hidden_; }
  std::vector<Layer>& hidden() { return hidden_; }
  const Layer& output() const { return output_; }
  Layer& output() { return output_; }

  /// Layer l in [0, L]; index L is the output layer.
  const Layer& layer(Index l) const { return l < num_hidden_layers() ? hidden_[l] : output_; }
  Layer& layer(Index l) { return l < num_hidden_layers() ? hidden_[l] : output_; }
  Index num_layers() const { return num_hidden_layers() + 1; }

  const std::vector<RuleType>& rules() const { return rules_; }
  void add_rule(RuleType rule) {
    if (rule.input_dim() != input_dim_) {
      throw ShapeError("rule has " + std::to_string(rule.input_dim()) +
                       " columns, network expects " + std::to_string(input_dim_));
    }
    rule.validate(static_cast<int>(num_treatments()));
    rules_.push_back(std::move(rule));
  }
  void clear_rules() { rules_.clear(); }

  void validate() const {
    if (input_dim_ < 1) throw ShapeError("input dimension must be positive");
    if (output_.W.rows() < 2) throw ShapeError("network needs at least two treatments");
    Index prev = input_dim_;
    for (Index l = 0; l < num_layers(); ++l) {
      const Layer& layer_l = layer(l);
      if (layer_l.W.cols() != prev || layer_l.b.size() != layer_l.W.rows() ||
          layer_l.W.rows() < 1) {
        throw ShapeError("layer " + std::to_string(l) + " shape does not chain");
      }
      if (layer_l.passthrough.size() != 0 && layer_l.passthrough.size() != layer_l.W.rows()) {
        throw ShapeError("layer " + std::to_string(l) + " passthrough mask has wrong length");
      }
      if (!layer_l.W.allFinite() || !layer_l.b.allFinite()) {
        throw ShapeError("layer " + std::to_string(l) + " has non-finite parameters");
      }
      prev = layer_l.W.rows();
    }
  }

 private:
  Index input_dim_ = 0;
  std::vector<Layer> hidden_;
  Layer output_;
  std::vector<RuleType> rules_;
};

using Layer = BasicLayer<double>;
using Network = BasicNetwork<double>;

/// Glorot-uniform weights, zero biases, all hidden neurons ReLU.
template <typename Scalar = double>
BasicNetwork<Scalar> make_network(Index input_dim, const std::vector<Index>& hidden_sizes,
                                  Index num_treatments, std::uint64_t seed) {
  if (input_dim < 1) throw ContractError("input dimension must be positive");
  if (num_treatments < 2) throw ContractError("need at least two treatments");
  std::mt19937_64 rng(seed);
  auto init = [&rng](Index rows, Index cols) {
    BasicLayer<Scalar> layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    layer.W.resize(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) layer.W(i, j) = static_cast<Scalar>(dist(rng));
    }
    layer.b = BasicLayer<Scalar>::Vector::Zero(rows);
    return layer;
  };
  std::vector<BasicLayer<Scalar>> hidden;
  Index prev = input_dim;
  for (Index n : hidden_sizes) {
    if (n < 1) throw ContractError("hidden layer sizes must be positive");
    hidden.push_back(init(n, prev));
    prev = n;
  }
  auto out = init(num_treatments, prev);
  return BasicNetwork<Scalar>(input_dim, std::move(hidden), std::move(out));
}

/// Intermediates of a forward pass; column c belongs to input sample c.
/// pre[l] are the pre-activations of layer l (l = L is the output layer),
/// post[0] is the input and post[l + 1] the activations of hidden layer l.
template <typename Scalar>
struct BasicForwardCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
  Matrix outputs;  // pre.back() plus rule offsets

  Index batch_size() const { return post.empty() ? 0 : post.front().cols(); }
};

using ForwardCache = BasicForwardCache<double>;

/// Adds M to the excluded outputs of every rule that fires, column by column.
template <typename Scalar, typename OutDerived, typename InDerived>
void add_rule_offsets(const BasicNetwork<Scalar>& net, Eigen::MatrixBase<OutDerived>& outputs,
                      const Eigen::MatrixBase<InDerived>& inputs) {
  for (const auto& rule : net.rules()) {
    for (Index c = 0; c < inputs.cols(); ++c) {
      if (!rule.indicator(inputs.col(c))) continue;
      for (Index p = 0; p < outputs.rows(); ++p) {
        if (!rule.allows(static_cast<int>(p))) outputs(p, c) += rule.big_m;
      }
    }
  }
}

/// Batched forward pass; `inputs` is d x B.
template <typename Scalar, typename Derived>
BasicForwardCache<Scalar> forward_batch(const BasicNetwork<Scalar>& net,
                                        const Eigen::MatrixBase<Derived>& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                     std::to_string(net.input_dim()));
  }
  BasicForwardCache<Scalar> cache;
  cache.post.reserve(net.num_layers());
  cache.pre.reserve(net.num_layers());
  cache.post.emplace_back(inputs);
  for (Index l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    cache.pre.emplace_back((layer.W * cache.post.back()).colwise() + layer.b);
    if (l + 1 == net.num_layers()) break;
    auto z = cache.pre.back().cwiseMax(Scalar(0)).eval();
    for (Index j = 0; j < layer.passthrough.size(); ++j) {
      if (layer.passthrough(j)) z.row(j) = cache.pre.back().row(j);
    }
    cache.post.push_back(std::move(z));
  }
  cache.outputs = cache.pre.back();
  add_rule_offsets(net, cache.outputs, inputs);
  return cache;
}

template <typename Scalar>
struct BasicForwardResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> outputs;
  BasicForwardCache<Scalar> cache;
};

template <typename Scalar, typename Derived>
BasicForwardResult<Scalar> forward(const BasicNetwork<Scalar>& net,
                                   const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != 1) throw ShapeError("forward expects a single column vector");
  BasicForwardResult<Scalar> result;
  result.cache = forward_batch(net, x);
  result.outputs = result.cache.outputs.col(0);
  return result;
}

/// Outputs only, no cache retained.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> evaluate(const BasicNetwork<Scalar>& net,
                                                  const Eigen::MatrixBase<Derived>& x) {
  return forward(net, x).outputs;
}

/// Bit j of layer i is 1 iff that neuron's pre-activation is strictly positive.
template <typename Scalar, typename Derived>
ActivationPattern activation_pattern(const BasicNetwork<Scalar>& net,
                                     const Eigen::MatrixBase<Derived>& x) {
  const auto cache = forward_batch(net, x);
  ActivationPattern pattern;
  for (Index l = 0; l < net.num_hidden_layers(); ++l) {
    const auto& layer = net.layer(l);
    for (Index j = 0; j < layer.outputs(); ++j) {
      if (layer.is_relu(j)) pattern.push_back(cache.pre[l](j, 0) > Scalar(0));
    }
  }
  return pattern;
}

/// Smallest |pre-activation| over ReLU neurons for column c of a cache.
template <typename Scalar>
Scalar min_relu_margin(const BasicNetwork<Scalar>& net, const BasicForwardCache<Scalar>& cache,
                       Index c) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (Index l = 0; l < net.num_hidden_layers(); ++l) {
    const auto& layer = net.layer(l);
    for (Index j = 0; j < layer.outputs(); ++j) {
      if (layer.is_relu(j)) m = std::min(m, std::abs(cache.pre[l](j, c)));
    }
  }
  return m;
}

template <typename Scalar>
struct BasicGradients {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  std::vector<Matrix> dW;  // one per layer, output layer last
  std::vector<Vector> db;
};

using Gradients = BasicGradients<double>;

/// Gradients of sum_c output_grad(:, c) . outputs(:, c) with respect to every
/// weight and bias. The ReLU derivative at exactly zero is taken as zero.
/// Rule offsets are constant and receive no gradient.
template <typename Scalar, typename Derived>
BasicGradients<Scalar> backward(const BasicNetwork<Scalar>& net,
                                const BasicForwardCache<Scalar>& cache,
                                const Eigen::MatrixBase<Derived>& output_grad) {
  using Matrix = typename BasicGradients<Scalar>::Matrix;
  const Index layers = net.num_layers();
  if (static_cast<Index>(cache.pre.size()) != layers ||
      static_cast<Index>(cache.post.size()) != layers) {
    throw ShapeError("forward cache does not match network depth");
  }
  if (output_grad.rows() != net.num_treatments() || output_grad.cols() != cache.batch_size()) {
    throw ShapeError("output gradient must be K x batch");
  }
  BasicGradients<Scalar> grads;
  grads.dW.resize(layers);
  grads.db.resize(layers);
  Matrix delta = output_grad;
  for (Index l = layers - 1; l >= 0; --l) {
    const auto& layer = net.layer(l);
    if (cache.post[l].rows() != layer.inputs() || cache.pre[l].rows() != layer.outputs()) {
      throw ShapeError("forward cache does not match layer " + std::to_string(l));
    }
    grads.dW[l].noalias() = delta * cache.post[l].transpose();
    grads.db[l] = delta.rowwise().sum();
    if (l == 0) break;
    Matrix upstream = layer.W.transpose() * delta;
    const auto& prev = net.layer(l - 1);
    const auto& prev_pre = cache.pre[l - 1];
    for (Index j = 0; j < upstream.rows(); ++j) {
      if (!prev.is_relu(j)) continue;
      for (Index c = 0; c < upstream.cols(); ++c) {
        if (!(prev_pre(j, c) > Scalar(0))) upstream(j, c) = Scalar(0);
      }
    }
    delta = std::move(upstream);
  }
  return grads;
}

}  // namespace prelu
