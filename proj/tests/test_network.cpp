#include "doctest.h"
#include "fixtures.hpp"
#include "prelu/adam.hpp"
#include "prelu/network.hpp"

using namespace prelu;
using prelu::testing::two_neuron_network;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Central differences of s(theta) = sum_c g(:, c) . f(x_c; theta).
double weighted_output(const Network& net, const Matrix& X, const Matrix& g) {
  return forward_batch(net, X).outputs.cwiseProduct(g).sum();
}

}  // namespace

TEST_CASE("two-neuron fixture forward values") {
  const Network net = two_neuron_network();
  const auto r = forward(net, vec({0.8, 0.6}));
  CHECK(r.outputs(0) == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(r.outputs(1) == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(r.cache.post.size() == 2);
  CHECK(r.cache.post[0].col(0).isApprox(vec({0.8, 0.6})));

  const auto origin = forward(net, vec({0.0, 0.0}));
  CHECK(origin.cache.post[1].col(0).isZero());
  CHECK(origin.outputs == net.output().b);
}

TEST_CASE("zero-weight network outputs its output bias") {
  Network net = make_network(3, {4, 2}, 2, 5);
  for (Index l = 0; l < net.num_layers(); ++l) net.layer(l).W.setZero();
  net.output().b = vec({0.25, -3.0});
  CHECK(evaluate(net, vec({1.0, -2.0, 7.0})) == vec({0.25, -3.0}));
}

TEST_CASE("activation pattern uses strict inequality") {
  const Network net = two_neuron_network();
  CHECK(activation_pattern(net, vec({0.8, 0.6})).to_string() == "11");
  CHECK(activation_pattern(net, vec({0.1, 0.3})).to_string() == "00");
  // x1 == x2 puts the first neuron exactly on its hyperplane.
  CHECK(activation_pattern(net, vec({0.5, 0.5})).to_string() == "01");
}

TEST_CASE("shape errors") {
  const Network net = two_neuron_network();
  CHECK_THROWS_AS(forward(net, vec({1.0, 2.0, 3.0})), ShapeError);
  const auto cache = forward(net, vec({0.1, 0.2})).cache;
  CHECK_THROWS_AS(backward(net, cache, Matrix::Zero(3, 1)), ShapeError);
  const Network other = make_network(2, {3, 3}, 2, 1);
  CHECK_THROWS_AS(backward(other, cache, Matrix::Zero(2, 1)), ShapeError);
  CHECK_THROWS_AS(make_network(0, {3}, 2, 1), ContractError);
  CHECK_THROWS_AS(make_network(2, {3}, 1, 1), ContractError);
}

TEST_CASE("glorot initialization bounds and determinism") {
  const Network a = make_network(20, {100, 50}, 3, 42);
  const Network b = make_network(20, {100, 50}, 3, 42);
  const Network c = make_network(20, {100, 50}, 3, 43);
  CHECK(a.layer(0).W == b.layer(0).W);
  CHECK(a.layer(0).W != c.layer(0).W);
  const double limit = std::sqrt(6.0 / (20 + 100));
  CHECK(a.layer(0).W.cwiseAbs().maxCoeff() <= limit);
  CHECK(a.layer(0).W.cwiseAbs().maxCoeff() > 0.9 * limit);
  CHECK(a.layer(1).b.isZero());
  CHECK(a.hidden_sizes() == std::vector<Index>{100, 50});
  CHECK(a.num_relu() == 150);
}

TEST_CASE("backward on trivial cases") {
  SUBCASE("zero output gradient gives zero gradients") {
    const Network net = prelu::testing::random_network(4, {5, 3}, 3, 9);
    const Matrix X = prelu::testing::uniform_points(4, 6, 2, -1, 1);
    const auto g = backward(net, forward_batch(net, X), Matrix::Zero(3, 6));
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
      CHECK(g.dW[l].isZero());
      CHECK(g.db[l].isZero());
    }
  }
  SUBCASE("single linear neuron") {
    Layer out2;
    out2.W = Matrix::Constant(2, 1, 0.7);
    out2.b = Vector::Constant(2, 0.1);
    const Network net(1, {}, out2);
    const auto g = backward(net, forward(net, vec({2.0})).cache, vec({1.0, 0.0}));
    CHECK(g.dW[0](0, 0) == doctest::Approx(2.0));
    CHECK(g.db[0](0) == doctest::Approx(1.0));
    CHECK(g.dW[0](1, 0) == 0.0);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<Index> hidden(static_cast<std::size_t>(1 + seed % 3), static_cast<Index>(3 + seed % 5));
    const Index d = 3, K = 2 + static_cast<Index>(seed % 2);
    const Network net = prelu::testing::random_network(d, hidden, K, seed);
    const Matrix X = prelu::testing::uniform_points(d, 5, seed + 100, -1, 1);
    const Matrix g = prelu::testing::uniform_points(K, 5, seed + 200, -1, 1);
    const auto cache = forward_batch(net, X);
    bool near_kink = false;
    for (Index c = 0; c < X.cols(); ++c) near_kink |= min_relu_margin(net, cache, c) < 1e-3;
    if (near_kink) continue;
    const auto grads = backward(net, cache, g);
    for (Index l = 0; l < net.num_layers(); ++l) {
      for (Index i = 0; i < net.layer(l).W.size(); ++i) {
        Network plus = net, minus = net;
        plus.layer(l).W.data()[i] += h;
        minus.layer(l).W.data()[i] -= h;
        const double fd = (weighted_output(plus, X, g) - weighted_output(minus, X, g)) / (2 * h);
        const double an = grads.dW[static_cast<std::size_t>(l)].data()[i];
        CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
      for (Index i = 0; i < net.layer(l).b.size(); ++i) {
        Network plus = net, minus = net;
        plus.layer(l).b(i) += h;
        minus.layer(l).b(i) -= h;
        const double fd = (weighted_output(plus, X, g) - weighted_output(minus, X, g)) / (2 * h);
        CHECK(std::abs(fd - grads.db[static_cast<std::size_t>(l)](i)) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("outputs are affine on a fixed activation pattern") {
  const Network net = prelu::testing::random_network(3, {6, 6}, 3, 77);
  const Matrix X = prelu::testing::uniform_points(3, 400, 1, -1, 1);
  int pairs_checked = 0;
  for (Index a = 0; a < X.cols() && pairs_checked < 20; ++a) {
    for (Index b = a + 1; b < X.cols(); ++b) {
      if (!(activation_pattern(net, X.col(a)) == activation_pattern(net, X.col(b)))) continue;
      // The midpoint shares the pattern by convexity, so f is affine along the segment.
      const Vector mid = 0.5 * (X.col(a) + X.col(b));
      const Vector fa = evaluate(net, X.col(a)), fb = evaluate(net, X.col(b)), fm = evaluate(net, mid);
      CHECK((fm - 0.5 * (fa + fb)).cwiseAbs().maxCoeff() <= 1e-10);
      ++pairs_checked;
      break;
    }
  }
  CHECK(pairs_checked > 0);
}

TEST_CASE("single precision instantiation") {
  const auto net = make_network<float>(2, {3}, 2, 1);
  Eigen::Vector2f x(0.3f, -0.2f);
  const auto r = forward(net, x);
  CHECK(r.outputs.size() == 2);
  const auto g = backward(net, r.cache, Eigen::Vector2f(1.0f, -1.0f));
  CHECK(g.dW.size() == 2);
}

TEST_CASE("activation pattern string round trip") {
  const auto p = ActivationPattern::from_string("1001");
  CHECK(p.size() == 4);
  CHECK(p[0]);
  CHECK_FALSE(p[1]);
  CHECK(p.to_string() == "1001");
  CHECK(ActivationPattern::from_string("01") < ActivationPattern::from_string("10"));
}
