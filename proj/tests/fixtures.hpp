#pragma once

#include <random>

#include "prelu/network.hpp"
#include "prelu/rule.hpp"

namespace prelu::testing {

// Two hidden neurons relu(x1 - x2) and relu(x1 + x2 - 0.5). The output rows
// are chosen so that with both neurons on, y0 = 1.5x1 + 2.5x2 - 1 and
// y1 = -0.5x1 - 1.5x2 + 0.5.
inline Network two_neuron_network() {
  Layer hidden;
  hidden.W.resize(2, 2);
  hidden.W << 1, -1, 1, 1;
  hidden.b.resize(2);
  hidden.b << 0, -0.5;
  Layer out;
  out.W.resize(2, 2);
  out.W << -0.5, 2, 0.5, -1;
  out.b = Vector::Zero(2);
  return Network(2, {hidden}, out);
}

// If x1 + x2 > 1 and x2 > 0.5 then prescribe 0.
inline Rule corner_rule(double big_m = 1000.0) {
  Rule rule;
  rule.A.resize(2, 2);
  rule.A << 1, 1, 0, 1;
  rule.b.resize(2);
  rule.b << 1, 0.5;
  rule.allowed = {0};
  rule.big_m = big_m;
  return rule;
}

inline Matrix uniform_points(Index d, Index n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix X(d, n);
  for (Index t = 0; t < n; ++t) {
    for (Index k = 0; k < d; ++k) X(k, t) = u(rng);
  }
  return X;
}

inline Matrix grid_points(Index steps) {
  Matrix X(2, steps * steps);
  Index c = 0;
  for (Index i = 0; i < steps; ++i) {
    for (Index j = 0; j < steps; ++j) {
      X(0, c) = static_cast<double>(i) / static_cast<double>(steps - 1);
      X(1, c) = static_cast<double>(j) / static_cast<double>(steps - 1);
      ++c;
    }
  }
  return X;
}

// Random network with nonzero biases so that activation boundaries do not
// all pass through the origin.
inline Network random_network(Index d, const std::vector<Index>& hidden, Index K, std::uint64_t seed) {
  Network net = make_network(d, hidden, K, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (Index l = 0; l < net.num_layers(); ++l) {
    for (Index j = 0; j < net.layer(l).b.size(); ++j) net.layer(l).b(j) = u(rng);
  }
  return net;
}

}  // namespace prelu::testing
