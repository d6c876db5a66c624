#pragma once

#include <span>

#include "prelu/data.hpp"
#include "prelu/network.hpp"

namespace prelu {

/// mu weighs the prescription outcome against the squared prediction error.
struct LossConfig {
  double mu = 1e-4;

  void validate() const;
};

/// Index of the smallest output; ties go to the lowest index.
template <typename Derived>
int prescribe(const Eigen::MatrixBase<Derived>& outputs) {
  Index best = 0;
  for (Index p = 1; p < outputs.size(); ++p) {
    if (outputs(p) < outputs(best)) best = p;
  }
  return static_cast<int>(best);
}

/// prescribe(forward(net, x)).
int prescribe(const Network& net, const Eigen::Ref<const Vector>& x);

/// Prescriptions for every column of X (d x n).
std::vector<int> prescribe_all(const Network& net, const Matrix& X);

struct LossResult {
  double loss = 0.0;
  double prescription = 0.0;  // sum of observed or estimated outcomes under the policy
  double prediction = 0.0;    // sum of squared errors on the administered arm
  Matrix output_grads;        // K x batch, d loss / d outputs
  ForwardCache cache;         // forward pass the gradient refers to
};

/// Combined objective summed over the selected rows:
///   mu * sum_t [y_t if pi(x_t) == p_t else f(x_t)_{pi(x_t)}]
///   + (1 - mu) * sum_t (y_t - f(x_t)_{p_t})^2
/// The prescribed index pi(x_t) is held fixed when differentiating.
LossResult loss_and_grad(const Network& net, const ObservationalData& data,
                         std::span<const Index> rows, const LossConfig& cfg);

/// Same, over every sample of `data`.
LossResult loss_and_grad(const Network& net, const ObservationalData& data, const LossConfig& cfg);

}  // namespace prelu
