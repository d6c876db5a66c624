#pragma once

#include <span>
#include <vector>

#include "prelu/network.hpp"

namespace prelu {

/// One observational record: features, administered treatment, outcome.
struct Sample {
  Vector x;
  int p = 0;
  double y = 0.0;
};

/// Observational samples stored column-wise: X is d x n, column t is x_t.
struct ObservationalData {
  Matrix X;
  std::vector<int> p;
  Vector y;

  Index size() const { return X.cols(); }
  Index dim() const { return X.rows(); }
  bool empty() const { return X.cols() == 0; }

  Sample sample(Index t) const { return {X.col(t), p[static_cast<std::size_t>(t)], y(t)}; }

  static ObservationalData from_samples(std::span<const Sample> samples);

  /// Rows selected by index, in the given order.
  ObservationalData subset(std::span<const Index> rows) const;

  /// Throws DataError on inconsistent lengths, treatments outside [0, K),
  /// or non-finite values.
  void validate(Index num_treatments) const;
};

}  // namespace prelu
