#include "prelu/loss.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace prelu {

void LossConfig::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0)) {
    throw ContractError("mu must lie in [0, 1], got " + std::to_string(mu));
  }
}

int prescribe(const Network& net, const Eigen::Ref<const Vector>& x) {
  return prescribe(evaluate(net, x));
}

std::vector<int> prescribe_all(const Network& net, const Matrix& X) {
  const auto cache = forward_batch(net, X);
  std::vector<int> out(static_cast<std::size_t>(X.cols()));
  for (Index c = 0; c < X.cols(); ++c) out[static_cast<std::size_t>(c)] = prescribe(cache.outputs.col(c));
  return out;
}

LossResult loss_and_grad(const Network& net, const ObservationalData& data,
                         std::span<const Index> rows, const LossConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw ContractError("loss_and_grad: empty batch");
  if (data.dim() != net.input_dim()) {
    throw ShapeError("loss_and_grad: data has " + std::to_string(data.dim()) +
                     " features, network expects " + std::to_string(net.input_dim()));
  }
  const Index batch = static_cast<Index>(rows.size());
  Matrix X(data.dim(), batch);
  for (Index c = 0; c < batch; ++c) X.col(c) = data.X.col(rows[static_cast<std::size_t>(c)]);

  LossResult r;
  r.cache = forward_batch(net, X);
  r.output_grads = Matrix::Zero(net.num_treatments(), batch);
  const double mu = cfg.mu;
  for (Index c = 0; c < batch; ++c) {
    const Index t = rows[static_cast<std::size_t>(c)];
    const int p_t = data.p[static_cast<std::size_t>(t)];
    const double y_t = data.y(t);
    if (p_t < 0 || p_t >= net.num_treatments()) {
      throw ContractError("sample " + std::to_string(t) + " has treatment outside [0, K)");
    }
    const auto out = r.cache.outputs.col(c);
    const int pi = prescribe(out);
    if (pi == p_t) {
      r.prescription += y_t;
    } else {
      r.prescription += out(pi);
      r.output_grads(pi, c) += mu;
    }
    const double residual = y_t - out(p_t);
    r.prediction += residual * residual;
    r.output_grads(p_t, c) += -2.0 * (1.0 - mu) * residual;
  }
  r.loss = mu * r.prescription + (1.0 - mu) * r.prediction;
  return r;
}

LossResult loss_and_grad(const Network& net, const ObservationalData& data, const LossConfig& cfg) {
  std::vector<Index> rows(static_cast<std::size_t>(data.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  return loss_and_grad(net, data, rows, cfg);
}

}  // namespace prelu
