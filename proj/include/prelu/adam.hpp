#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "prelu/network.hpp"

namespace prelu {

template <typename Scalar>
struct BasicAdamState {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  long step = 0;

  std::vector<Matrix> m_W, v_W;
  std::vector<Vector> m_b, v_b;

  /// Zeroed moment buffers shaped like `net`'s parameters.
  static BasicAdamState for_network(const BasicNetwork<Scalar>& net, Scalar learning_rate) {
    BasicAdamState s;
    s.learning_rate = learning_rate;
    for (Index l = 0; l < net.num_layers(); ++l) {
      const auto& layer = net.layer(l);
      s.m_W.push_back(Matrix::Zero(layer.W.rows(), layer.W.cols()));
      s.v_W.push_back(Matrix::Zero(layer.W.rows(), layer.W.cols()));
      s.m_b.push_back(Vector::Zero(layer.b.size()));
      s.v_b.push_back(Vector::Zero(layer.b.size()));
    }
    return s;
  }
};

using AdamState = BasicAdamState<double>;

/// One bias-corrected Adam update of every layer's weights and biases.
template <typename Scalar>
void adam_step(BasicNetwork<Scalar>& net, const BasicGradients<Scalar>& grads,
               BasicAdamState<Scalar>& state) {
  const Index layers = net.num_layers();
  if (static_cast<Index>(grads.dW.size()) != layers ||
      static_cast<Index>(state.m_W.size()) != layers) {
    throw ShapeError("adam: gradient/state layer count does not match network");
  }
  for (Index l = 0; l < layers; ++l) {
    const auto& layer = net.layer(l);
    if (grads.dW[l].rows() != layer.W.rows() || grads.dW[l].cols() != layer.W.cols() ||
        grads.db[l].size() != layer.b.size() || state.m_W[l].rows() != layer.W.rows() ||
        state.m_W[l].cols() != layer.W.cols()) {
      throw ShapeError("adam: shape mismatch at layer " + std::to_string(l));
    }
    if (!grads.dW[l].allFinite() || !grads.db[l].allFinite()) {
      throw TrainingError("non-finite gradient at layer " + std::to_string(l));
    }
  }

  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  const Scalar b1 = state.beta1, b2 = state.beta2, lr = state.learning_rate, eps = state.epsilon;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (Index l = 0; l < layers; ++l) {
    auto& layer = net.layer(l);
    update(layer.W, grads.dW[l], state.m_W[l], state.v_W[l]);
    update(layer.b, grads.db[l], state.m_b[l], state.v_b[l]);
  }
}

}  // namespace prelu
