#include <cmath>
#include <fstream>

#include "doctest.h"
#include "prelu/datagen.hpp"
#include "prelu/loss.hpp"
#include "prelu/model_io.hpp"
#include "tmpdir.hpp"

using namespace prelu;
using prelu::testing::TempDir;

namespace {

double variance(const Vector& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1); }

Vector features(std::initializer_list<std::pair<int, double>> set) {
  Vector x = Vector::Zero(20);
  for (const auto& [k, v] : set) x(k - 1) = v;
  return x;
}

}  // namespace

TEST_CASE("feature marginals") {
  const Matrix X = gen_features(100000, 123);
  CHECK(X.rows() == 20);
  const double bern = X.row(1).mean();
  CHECK(bern >= 0.49);
  CHECK(bern <= 0.51);
  const double var = variance(X.row(0).transpose());
  CHECK(var >= 0.97);
  CHECK(var <= 1.03);
  CHECK(((X.row(3).array() == 0.0) || (X.row(3).array() == 1.0)).all());
  CHECK(gen_features(50, 9) == gen_features(50, 9));
  CHECK(gen_features(50, 9) != gen_features(50, 10));
}

TEST_CASE("benchmark functions") {
  CHECK(eval_f(1, features({{1, 2.0}})) == 0.0);
  CHECK(eval_f(1, features({{1, 0.0}})) == -5.0);
  CHECK(eval_f(4, features({{2, 1}, {4, 1}, {6, 1}})) == 1.0);
  CHECK(eval_f(4, features({})) == 8.0);
  Vector ones = Vector::Zero(20);
  ones.head(9).setOnes();
  CHECK(eval_f(3, ones) == -1.0);
  CHECK(eval_f(2, features({{1, 2}, {3, 1}, {8, 0.5}, {9, 3}})) == doctest::Approx(4.0 + 3.0));
  CHECK_THROWS_AS(eval_f(5, ones), ContractError);
  CHECK_THROWS_AS(eval_f(1, Vector::Zero(5)), ShapeError);
}

TEST_CASE("outcome formulas") {
  const Vector two = outcome_vector(2, 0.0, {2.0});
  CHECK(two == Eigen::Vector2d(-1, 1));
  CHECK(prescribe(two) == 0);
  const Vector three = outcome_vector(3, 0.0, {1.0, 0.0});
  CHECK(three == Eigen::Vector3d(0, 1, 0));
  CHECK(prescribe(three) == 0);
  CHECK(outcome_vector(3, 0.5, {1.0, 2.0}) == Eigen::Vector3d(0.5, 1.5, 2.5));
  for (double base : {-2.0, 0.0, 3.0}) CHECK(prescribe(outcome_vector(2, base, {-0.3})) == 1);
}

TEST_CASE("propensity probabilities") {
  CHECK(propensity_probabilities(2, 0.0)(1) == doctest::Approx(0.5));
  const Vector p3 = propensity_probabilities(3, 0.0);
  CHECK(p3(0) == doctest::Approx(0.5));
  CHECK(p3(1) == doctest::Approx(0.25));
  CHECK(p3(2) == doctest::Approx(0.25));
  CHECK(propensity_probabilities(2, 40.0)(1) == doctest::Approx(1.0));
  CHECK(propensity_probabilities(2, 1000.0).allFinite());
  CHECK(propensity_probabilities(2, -1000.0).allFinite());
}

TEST_CASE("score propensity") {
  const Vector uniform = score_probabilities(3, 0.0);
  CHECK(uniform.isApprox(Vector::Constant(3, 1.0 / 3.0)));
  const Vector shifted = score_probabilities(3, 1.0);
  const Eigen::Vector3d raw(std::exp(-1.0), 1.0, std::exp(1.0));
  CHECK(shifted.isApprox(raw / raw.sum(), 1e-14));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(score_probabilities(4, z(rng)).sum() - 1.0) <= 1e-12);

  Matrix X = gen_features(3000, 2);
  const auto p = score_propensity(X, 0, 3, 5);
  CHECK(p.size() == 3000);
  CHECK(score_propensity(X, 0, 3, 5) == p);
  // High scores favour treatment 2, low scores treatment 0.
  double hi = 0, lo = 0;
  for (Index t = 0; t < X.cols(); ++t) {
    if (X(0, t) > 1.0) hi += p[static_cast<std::size_t>(t)] == 2;
    if (X(0, t) < -1.0) lo += p[static_cast<std::size_t>(t)] == 2;
  }
  CHECK(hi > lo);
  X.row(4).setConstant(2.0);
  CHECK_THROWS_AS(score_propensity(X, 4, 3, 1), DataError);
}

TEST_CASE("standardization and oracle consistency") {
  const auto spec = DatasetSpec::benchmark(5, 10000, 100, 3);
  const Matrix X = gen_features(10000, 8);
  const auto out = gen_outcomes(spec, X);
  REQUIRE(out.standardization.mean.size() == 3);
  const auto fns = std::vector<int>{2, 1, 3};
  for (std::size_t k = 0; k < fns.size(); ++k) {
    Vector z(X.cols());
    for (Index t = 0; t < X.cols(); ++t) {
      z(t) = (eval_f(fns[k], X.col(t)) - out.standardization.mean[k]) / out.standardization.sd[k];
    }
    CHECK(std::abs(z.mean()) <= 0.02);
    CHECK(std::sqrt(variance(z)) >= 0.98);
    CHECK(std::sqrt(variance(z)) <= 1.02);
  }
  for (Index t = 0; t < out.oracle.size(); ++t) {
    CHECK(out.oracle.optimal[static_cast<std::size_t>(t)] == prescribe(out.oracle.outcomes.col(t)));
  }
  Matrix flat = X;
  flat.row(0).setConstant(0.0);  // f1 is then constant at -5
  CHECK_THROWS_AS(gen_outcomes(DatasetSpec::benchmark(1), flat), DataError);
  CHECK_THROWS_AS(DatasetSpec::benchmark(7), ContractError);
}

TEST_CASE("synthetic dataset statistics") {
  const auto ds = make_dataset(DatasetSpec::benchmark(1, 10000, 500, 11));
  Vector noise(ds.train.size());
  std::vector<Index> arm(2, 0);
  for (Index t = 0; t < ds.train.size(); ++t) {
    const int p = ds.train.p[static_cast<std::size_t>(t)];
    noise(t) = ds.train.y(t) - ds.train_oracle.outcomes(p, t);
    ++arm[static_cast<std::size_t>(p)];
  }
  CHECK(std::abs(noise.mean()) <= 0.05);
  CHECK(variance(noise) >= 0.9);
  CHECK(variance(noise) <= 1.1);
  CHECK(arm[0] >= 1000);
  CHECK(arm[1] >= 1000);
  CHECK(ds.test.cols() == 500);
  CHECK(ds.test_oracle.size() == 500);
}

TEST_CASE("dataset files regenerate byte-identically") {
  TempDir a, b;
  const auto spec = DatasetSpec::benchmark(3, 10000, 5000, 7);
  write_dataset(make_dataset(spec), a.path());
  write_dataset(make_dataset(spec), b.path());
  for (const char* name : {"train.csv", "test.csv", "oracle.csv"}) {
    CHECK(read_text(a / name) == read_text(b / name));
  }
}

TEST_CASE("csv round trip") {
  TempDir dir;
  const auto ds = make_dataset(DatasetSpec::benchmark(6, 200, 50, 1));
  const auto paths = write_dataset(ds, dir.path());
  const ObservationalData train = load_observational_csv(paths.train);
  CHECK(train.X == ds.train.X);
  CHECK(train.p == ds.train.p);
  CHECK(train.y == ds.train.y);
  CHECK(load_features_csv(paths.test) == ds.test);
  CHECK(load_features_csv(paths.train) == ds.train.X);
  Standardization stats;
  const OracleTable oracle = load_oracle_csv(paths.oracle, &stats);
  CHECK(oracle.outcomes == ds.test_oracle.outcomes);
  CHECK(oracle.optimal == ds.test_oracle.optimal);
  CHECK(stats.names == ds.standardization.names);
  CHECK(stats.mean == ds.standardization.mean);
  CHECK(stats.sd == ds.standardization.sd);
}

TEST_CASE("malformed csv reports the line") {
  TempDir dir;
  const auto path = dir / "bad.csv";
  write_text(path, "x1,x2,p,y\n1,2,0,3\n1,oops,1,2\n");
  try {
    load_observational_csv(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write_text(path, "x1,x2,p,y\n1,2,0\n");
  CHECK_THROWS_AS(load_observational_csv(path), ParseError);
  write_text(path, "a,b\n1,2\n");
  CHECK_THROWS_AS(load_features_csv(path), ParseError);
  write_text(path, "y_0,y_1,optimal\n0.1,0.2,4\n");
  CHECK_THROWS_AS(load_oracle_csv(path), ParseError);
  CHECK_THROWS_AS(load_observational_csv(dir / "missing.csv"), DataError);
}
