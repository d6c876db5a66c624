// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "prelu/baselines.hpp"
#include "prelu/constraints.hpp"
#include "prelu/datagen.hpp"
#include "prelu/loss.hpp"
#include "prelu/partition.hpp"
#include "prelu/trainer.hpp"
#include "prelu/tree.hpp"

using namespace prelu;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Loss gradient against central differences.

double total_loss(const Network& net, const ObservationalData& data, const std::vector<int>& pi, double mu) {
  const auto fwd = forward_batch(net, data.X);
  double loss = 0.0;
  for (Index t = 0; t < data.size(); ++t) {
    const int p = data.p[static_cast<std::size_t>(t)];
    const int q = pi[static_cast<std::size_t>(t)];
    loss += mu * (q == p ? data.y(t) : fwd.outputs(q, t));
    const double r = data.y(t) - fwd.outputs(p, t);
    loss += (1 - mu) * r * r;
  }
  return loss;
}

bool criterion1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  double worst = 0.0;
  int nets = 0;
  for (std::uint64_t seed = 0; nets < 50; ++seed) {
    const Index layers = 1 + static_cast<Index>(seed % 3);
    const Index width = 2 + static_cast<Index>(rng() % 15);
    const Index d = 2 + static_cast<Index>(rng() % 4);
    const Index K = 2 + static_cast<Index>(rng() % 3);
    const Network net = prelu::testing::random_network(d, std::vector<Index>(static_cast<std::size_t>(layers), width),
                                                       K, seed);
    // Off-boundary batch: every ReLU and the prescribed minimum are at least
    // 1e-3 away from switching.
    ObservationalData data;
    data.X.resize(d, 0);
    std::vector<Matrix::Index> keep;
    const Matrix cand = prelu::testing::uniform_points(d, 64, seed + 1000, -1, 1);
    const auto cache = forward_batch(net, cand);
    for (Index c = 0; c < cand.cols() && static_cast<Index>(keep.size()) < 16; ++c) {
      Vector out = cache.outputs.col(c);
      std::sort(out.data(), out.data() + out.size());
      if (min_relu_margin(net, cache, c) > 1e-3 && out(1) - out(0) > 1e-3) keep.push_back(c);
    }
    if (keep.size() < 4) continue;
    data.X = cand(Eigen::all, keep);
    for (std::size_t i = 0; i < keep.size(); ++i) data.p.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(K)));
    data.y = Vector::NullaryExpr(data.size(), [&] { return g(rng); });

    const LossConfig cfg{0.3};
    const auto res = loss_and_grad(net, data, cfg);
    const auto grads = backward(net, res.cache, res.output_grads);
    const std::vector<int> pi = prescribe_all(net, data.X);
    const double h = 1e-6;
    std::vector<double> an, fd;
    for (Index l = 0; l < net.num_layers(); ++l) {
      for (int which = 0; which < 2; ++which) {
        const Index count = which == 0 ? net.layer(l).W.size() : net.layer(l).b.size();
        for (Index i = 0; i < count; ++i) {
          Network plus = net, minus = net;
          double* pp = which == 0 ? plus.layer(l).W.data() : plus.layer(l).b.data();
          double* mp = which == 0 ? minus.layer(l).W.data() : minus.layer(l).b.data();
          pp[i] += h;
          mp[i] -= h;
          fd.push_back((total_loss(plus, data, pi, cfg.mu) - total_loss(minus, data, pi, cfg.mu)) / (2 * h));
          an.push_back(which == 0 ? grads.dW[static_cast<std::size_t>(l)].data()[i]
                                  : grads.db[static_cast<std::size_t>(l)](i));
        }
      }
    }
    const Eigen::Map<const Vector> a(an.data(), static_cast<Index>(an.size()));
    const Eigen::Map<const Vector> f(fd.data(), static_cast<Index>(fd.size()));
    const double rel = (a - f).norm() / std::max({a.norm(), f.norm(), 1e-12});
    worst = std::max(worst, rel);
    ++nets;
  }
  const double secs = seconds_since(start);
  const bool pass = worst < 1e-4 && secs < 30.0;
  report(1, pass, fmt("gradient check on %d networks, worst relative error %.3g, %.2f s", nets, worst, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 2. Two-neuron fixture regions.

bool criterion2() {
  const auto start = Clock::now();
  const Network net = prelu::testing::two_neuron_network();
  const auto patterns = enumerate_patterns(net, prelu::testing::grid_points(201));
  const Region p1 = region_halfspaces(net, ActivationPattern(std::vector<bool>{true, true}));
  Matrix W(2, 2);
  W << 1.5, 2.5, -0.5, -1.5;
  const Vector b = Eigen::Vector2d(-1.0, 0.5);
  const double err = std::max((p1.outputs.weights - W).cwiseAbs().maxCoeff(),
                              (p1.outputs.offset - b).cwiseAbs().maxCoeff());
  const double secs = seconds_since(start);
  const bool pass = patterns.size() == 4 && err <= 1e-12 && secs < 5.0;
  report(2, pass, fmt("%zu patterns on the 201x201 grid, P1 affine error %.3g, %.2f s", patterns.size(), err, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 3 and 4. Certificates on trained networks.

struct TrainedCase {
  Network net;
  Index d;
};

std::vector<TrainedCase> trained_networks() {
  const std::array<std::pair<std::vector<Index>, Index>, 4> shapes{{
      {{6, 6}, 3}, {{8}, 4}, {{10, 5}, 2}, {{4, 4, 4}, 3}}};
  std::vector<TrainedCase> out;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto& [hidden, K] = shapes[i % shapes.size()];
    const Index d = 2 + static_cast<Index>(i % 3);
    ObservationalData data;
    data.X = prelu::testing::uniform_points(d, 1500, 500 + i);
    std::mt19937_64 rng(900 + i);
    std::normal_distribution<double> noise(0.0, 0.1);
    data.y.resize(data.size());
    for (Index t = 0; t < data.size(); ++t) {
      const int p = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
      data.p.push_back(p);
      data.y(t) = std::sin(3.0 * data.X(0, t) + p) + (p - 1.0) * data.X(1, t) + noise(rng);
    }
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 5e-3;
    cfg.seed = i;
    Network net = prelu::testing::random_network(d, hidden, K, 40 + i);
    out.push_back({train(std::move(net), data, cfg).net, d});
  }
  return out;
}

bool criterion3(const std::vector<TrainedCase>& cases) {
  const auto start = Clock::now();
  Index mismatches = 0, checked = 0, boundary = 0, largest = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const Index K = c.net.num_treatments();
    largest = std::max(largest, c.net.num_relu() + K * (K - 1) / 2);
    const ObliqueTree tree = extract_tree(c.net, ExtractOptions{});
    const auto r = verify_equivalence(c.net, tree, prelu::testing::uniform_points(c.d, 10000, 7000 + i));
    mismatches += r.mismatches;
    checked += r.checked;
    boundary += r.boundary;
  }
  const double secs = seconds_since(start);
  const bool pass = mismatches == 0 && largest <= 18 && secs < 120.0;
  report(3, pass,
         fmt("%zu trained networks (max N+P %ld), %ld points checked, %ld on boundaries, %ld mismatches, %.2f s",
             cases.size(), static_cast<long>(largest), static_cast<long>(checked), static_cast<long>(boundary),
             static_cast<long>(mismatches), secs));
  return pass;
}

bool criterion4(const std::vector<TrainedCase>& cases) {
  const auto start = Clock::now();
  Index bad_count = 0, bad_treatment = 0, checked = 0, skipped = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const Matrix X = prelu::testing::uniform_points(c.d, 10000, 7000 + i);
    const auto cache = forward_batch(c.net, X);
    std::map<ActivationPattern, std::vector<TreatmentCell>> cells;
    for (Index t = 0; t < X.cols(); ++t) {
      Vector out = cache.outputs.col(t);
      std::sort(out.data(), out.data() + out.size());
      if (min_relu_margin(c.net, cache, t) <= kBoundaryTolerance || out(1) - out(0) <= kBoundaryTolerance) {
        ++skipped;
        continue;
      }
      const ActivationPattern pattern = region_pattern(c.net, X.col(t));
      auto it = cells.find(pattern);
      if (it == cells.end()) it = cells.emplace(pattern, treatment_cells(region_halfspaces(c.net, pattern))).first;
      int found = 0, treatment = -1;
      for (const auto& cell : it->second) {
        if (cell.contains(X.col(t))) {
          ++found;
          treatment = cell.treatment;
        }
      }
      ++checked;
      if (found != 1) ++bad_count;
      else if (treatment != prescribe(cache.outputs.col(t))) ++bad_treatment;
    }
  }
  const double secs = seconds_since(start);
  const bool pass = bad_count == 0 && bad_treatment == 0;
  report(4, pass,
         fmt("%ld points checked (%ld on boundaries), %ld not in exactly one cell, %ld wrong cell treatment, %.2f s",
             static_cast<long>(checked), static_cast<long>(skipped), static_cast<long>(bad_count),
             static_cast<long>(bad_treatment), secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 5. Two-neuron fixture with the corner rule.

Index count_violations(const Network& net, const std::vector<Rule>& rules, const Matrix& X) {
  Index violations = 0;
  const std::vector<int> pi = prescribe_all(net, X);
  for (Index t = 0; t < X.cols(); ++t) {
    for (const auto& rule : rules) {
      if (indicator(rule, X.col(t)) && !rule.allows(pi[static_cast<std::size_t>(t)])) ++violations;
    }
  }
  return violations;
}

bool criterion5() {
  const Network base = prelu::testing::two_neuron_network();
  const Rule rule = prelu::testing::corner_rule(1000.0);
  const Network constrained = inject_rule(base, rule);
  const Matrix grid = prelu::testing::grid_points(201);
  Index in_corner = 0, corner_wrong = 0, elsewhere_wrong = 0;
  for (Index t = 0; t < grid.cols(); ++t) {
    const Vector x = grid.col(t);
    const int got = prescribe(constrained, x);
    const bool p1 = activation_pattern(base, x).to_string() == "11";
    if (p1 && x(0) > 0.5 && x(1) > 0.5) {
      ++in_corner;
      corner_wrong += got != 0;
    } else {
      const int expected = indicator(rule, x) ? 0 : prescribe(base, x);
      elsewhere_wrong += got != expected;
    }
  }
  const Index grid_violations = count_violations(constrained, {rule}, grid);

  // A network trained on rule-filtered data with the rule attached.
  ObservationalData data;
  data.X = prelu::testing::uniform_points(2, 3000, 55);
  std::mt19937_64 rng(56);
  data.y.resize(data.size());
  for (Index t = 0; t < data.size(); ++t) {
    data.p.push_back(static_cast<int>(rng() % 2));
    data.y(t) = data.p.back() == 0 ? 1.0 - data.X(0, t) : data.X(1, t);
  }
  const FilterResult filtered = filter_violating(data, {rule});
  TrainConfig cfg;
  cfg.epochs = 5;
  const Network trained = train(inject_rule(make_network(2, {8, 8}, 2, 3), rule), filtered.kept, cfg).net;
  const Index trained_violations = count_violations(trained, {rule}, prelu::testing::uniform_points(2, 20000, 57));

  const bool pass = in_corner > 0 && corner_wrong == 0 && elsewhere_wrong == 0 && grid_violations == 0 &&
                    trained_violations == 0 && filtered.removed.size() > 0;
  report(5, pass,
         fmt("corner points %ld (%ld wrong), other points wrong %ld, violations on grid %ld, "
             "trained network violations %ld (%ld samples filtered)",
             static_cast<long>(in_corner), static_cast<long>(corner_wrong), static_cast<long>(elsewhere_wrong),
             static_cast<long>(grid_violations), static_cast<long>(trained_violations),
             static_cast<long>(filtered.removed.size())));
  return pass;
}

// ---------------------------------------------------------------------------
// 6. Benchmark accuracy with the full configuration.

bool criterion6() {
  struct Target {
    int id;
    double min_accuracy;
  };
  const std::array<Target, 6> targets{{{3, 99.0}, {4, 91.0}, {1, 78.0}, {2, 62.0}, {5, 84.0}, {6, 82.0}}};
  bool all = true;
  std::string detail;
  for (const auto& target : targets) {
    const auto start = Clock::now();
    double sum = 0.0;
    std::string runs;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto ds = make_dataset(DatasetSpec::benchmark(target.id, 10000, 5000, seed));
      TrainConfig cfg;
      cfg.seed = seed;
      Network net = make_network(kSyntheticFeatures, {100, 100, 100, 100, 100}, ds.spec.num_treatments, seed);
      const Network trained = train(std::move(net), ds.train, cfg).net;
      const double acc = evaluate_policy(trained, ds.test, ds.test_oracle).accuracy;
      sum += acc;
      runs += fmt("%s%.2f", runs.empty() ? "" : "/", acc);
    }
    const double mean = sum / 3.0;
    const double secs = seconds_since(start);
    const bool ok = mean >= target.min_accuracy && secs <= 900.0;
    all = all && ok;
    std::printf("  dataset %d: mean accuracy %.2f%% (runs %s), target >= %.0f%%, %.1f s%s\n", target.id, mean,
                runs.c_str(), target.min_accuracy, secs, ok ? "" : "  <-- below target");
    std::fflush(stdout);
    detail += fmt("%sD%d %.2f", detail.empty() ? "" : ", ", target.id, mean);
  }
  report(6, all, "mean accuracy over 3 seeds: " + detail);
  return all;
}

// ---------------------------------------------------------------------------
// 7. Regress-and-compare baseline.

bool criterion7() {
  const auto start = Clock::now();
  auto mean_accuracy = [](int id) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto ds = make_dataset(DatasetSpec::benchmark(id, 10000, 5000, seed));
      const RcLinearModel rc = fit_rc_ols(ds.train, ds.spec.num_treatments);
      sum += evaluate_policy(rc, ds.test, ds.test_oracle).accuracy;
    }
    return sum / 3.0;
  };
  const double d3 = mean_accuracy(3);
  const double d1 = mean_accuracy(1);
  const double secs = seconds_since(start);
  const bool pass = d3 == 100.0 && d1 >= 54.0 && d1 <= 60.0 && secs < 60.0;
  report(7, pass, fmt("R&C-OLS mean accuracy dataset 3 %.2f%% (target 100), dataset 1 %.2f%% (target 54-60), %.1f s",
                      d3, d1, secs));
  return pass;
}

// ---------------------------------------------------------------------------
// 8. Sparse single-layer network and its data-driven tree.

bool criterion8() {
  const auto ds = make_dataset(DatasetSpec::benchmark(1, 10000, 5000, 0));
  TrainConfig cfg;
  cfg.sparse = true;
  const Network net = train(make_network(kSyntheticFeatures, {5}, 2, 0), ds.train, cfg).net;
  Index max_nonzero = 0;
  for (Index j = 0; j < net.layer(0).W.rows(); ++j) {
    max_nonzero = std::max<Index>(max_nonzero, (net.layer(0).W.row(j).array() != 0.0).count());
  }
  ExtractOptions opts;
  opts.mode = ExtractMode::kDataDriven;
  opts.calibration = &ds.test;
  const ObliqueTree tree = extract_tree(net, opts);
  Index disagree = 0;
  const std::vector<int> pi = prescribe_all(net, ds.test);
  for (Index t = 0; t < ds.test.cols(); ++t) disagree += tree.predict(ds.test.col(t)) != pi[static_cast<std::size_t>(t)];
  const bool pass = max_nonzero <= 1 && tree.depth() <= 6 && disagree == 0;
  report(8, pass,
         fmt("max nonzero incoming weights %ld, tree depth %d with %ld leaves, %ld disagreements on %ld calibration "
             "points",
             static_cast<long>(max_nonzero), tree.depth(), static_cast<long>(tree.num_leaves()),
             static_cast<long>(disagree), static_cast<long>(ds.test.cols())));
  return pass;
}

// ---------------------------------------------------------------------------
// 9. Score-based propensity in place of the unavailable clinical data.

bool criterion9(bool c5, bool c8) {
  const Vector uniform = score_probabilities(3, 0.0);
  const Vector tilted = score_probabilities(3, 1.0);
  const Eigen::Vector3d raw(std::exp(-1.0), 1.0, std::exp(1.0));
  const bool formula = uniform.isApprox(Vector::Constant(3, 1.0 / 3.0), 1e-14) &&
                       tilted.isApprox(raw / raw.sum(), 1e-14);
  const bool pass = c5 && c8 && formula;
  report(9, pass,
         fmt("covered by the constrained fixture (%s), the sparse tree path (%s) and score propensity formulas (%s)",
             c5 ? "ok" : "failed", c8 ? "ok" : "failed", formula ? "ok" : "failed"));
  return pass;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion1();
  criterion2();
  const auto cases = trained_networks();
  criterion3(cases);
  criterion4(cases);
  const bool c5 = criterion5();
  criterion6();
  criterion7();
  const bool c8 = criterion8();
  criterion9(c5, c8);
  std::printf("%d of 9 criteria failed (%.1f s total)\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
