#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "prelu/errors.hpp"

namespace prelu {

/// "If A x > b (row-wise, strictly) then prescribe a treatment in `allowed`."
/// When the rule fires, `big_m` is added to every output outside `allowed`.
template <typename Scalar>
struct BasicRule {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix A;
  Vector b;
  std::vector<int> allowed;  // sorted, unique
  Scalar big_m = Scalar(1000);

  int rows() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(A.cols()); }

  bool allows(int treatment) const {
    return std::binary_search(allowed.begin(), allowed.end(), treatment);
  }

  /// min_i (a_i . x - b_i); the rule fires iff this is > 0.
  template <typename Derived>
  Scalar margin(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != A.cols()) {
      throw ShapeError("rule expects " + std::to_string(A.cols()) +
                       " features, got " + std::to_string(x.size()));
    }
    return (A * x - b).minCoeff();
  }

  template <typename Derived>
  bool indicator(const Eigen::MatrixBase<Derived>& x) const {
    return margin(x) > Scalar(0);
  }

  /// Throws ContractError unless the rule is well formed for K treatments.
  void validate(int num_treatments) const {
    if (A.rows() < 1) throw ContractError("rule needs at least one row");
    if (b.size() != A.rows()) throw ShapeError("rule: b length must equal rows of A");
    if (allowed.empty()) throw ContractError("rule: allowed set is empty");
    for (int t : allowed) {
      if (t < 0 || t >= num_treatments) {
        throw ContractError("rule: allowed treatment " + std::to_string(t) +
                            " outside [0, " + std::to_string(num_treatments) + ")");
      }
    }
    if (!(big_m > Scalar(0))) throw ContractError("rule: M must be positive");
    if (!A.allFinite() || !b.allFinite()) throw ContractError("rule: non-finite coefficients");
  }
};

using Rule = BasicRule<double>;

}  // namespace prelu
