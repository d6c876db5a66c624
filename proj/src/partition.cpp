#include "prelu/partition.hpp"

#include <algorithm>

namespace prelu {
namespace {

std::vector<double> to_std(const Eigen::Ref<const Vector>& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

bool Region::contains(const Eigen::Ref<const Vector>& x) const {
  return std::all_of(halfspaces.begin(), halfspaces.end(), [&](const Halfspace& h) { return h.contains(x); }) &&
         std::all_of(rule_conditions.begin(), rule_conditions.end(),
                     [&](const RuleCondition& c) { return c.holds(x); });
}

bool TreatmentCell::contains(const Eigen::Ref<const Vector>& x) const {
  return std::all_of(comparisons.begin(), comparisons.end(), [&](const Halfspace& h) { return h.contains(x); });
}

ActivationPattern region_pattern(const Network& net, const Eigen::Ref<const Vector>& x) {
  std::vector<bool> bits;
  for (const auto& rule : net.rules()) bits.push_back(rule.indicator(x));
  const auto hidden = activation_pattern(net, x);
  bits.insert(bits.end(), hidden.bits().begin(), hidden.bits().end());
  return ActivationPattern(std::move(bits));
}

std::map<ActivationPattern, Index> enumerate_patterns(const Network& net, const Matrix& points) {
  if (points.cols() == 0) throw ContractError("enumerate_patterns: no points");
  if (points.rows() != net.input_dim()) throw ShapeError("enumerate_patterns: point dimension mismatch");
  std::map<ActivationPattern, Index> counts;
  constexpr Index kChunk = 4096;
  for (Index start = 0; start < points.cols(); start += kChunk) {
    const Index len = std::min(kChunk, points.cols() - start);
    const auto cache = forward_batch(net, points.middleCols(start, len));
    for (Index c = 0; c < len; ++c) {
      std::vector<bool> bits;
      for (const auto& rule : net.rules()) bits.push_back(rule.indicator(points.col(start + c)));
      for (Index l = 0; l < net.num_hidden_layers(); ++l) {
        const auto& layer = net.layer(l);
        for (Index j = 0; j < layer.outputs(); ++j) {
          if (layer.is_relu(j)) bits.push_back(cache.pre[l](j, c) > 0.0);
        }
      }
      ++counts[ActivationPattern(std::move(bits))];
    }
  }
  return counts;
}

Region region_halfspaces(const Network& net, const ActivationPattern& pattern) {
  const std::size_t num_rules = net.rules().size();
  if (pattern.size() != num_rules + static_cast<std::size_t>(net.num_relu())) {
    throw ShapeError("pattern has " + std::to_string(pattern.size()) + " bits, expected " +
                     std::to_string(num_rules + static_cast<std::size_t>(net.num_relu())));
  }
  Region region;
  region.pattern = pattern;
  for (std::size_t r = 0; r < num_rules; ++r) {
    region.rule_conditions.push_back({static_cast<int>(r), net.rules()[r], pattern[r]});
  }

  std::size_t bit = num_rules;
  AffineMap in = AffineMap::identity(net.input_dim());
  for (Index l = 0; l < net.num_hidden_layers(); ++l) {
    const Layer& layer = net.layer(l);
    AffineMap pre = compose(layer, in);
    std::vector<bool> layer_bits;
    for (Index j = 0; j < layer.outputs(); ++j) {
      if (!layer.is_relu(j)) continue;
      const bool on = pattern[bit++];
      layer_bits.push_back(on);
      region.halfspaces.push_back(
          {pre.weights.row(j).transpose(), pre.offset(j), on ? Sense::kPositive : Sense::kNonPositive});
    }
    in = mask(layer, std::move(pre), layer_bits);
  }
  region.outputs = compose(net.output(), in);
  for (const auto& cond : region.rule_conditions) {
    if (!cond.active) continue;
    for (Index p = 0; p < net.num_treatments(); ++p) {
      if (!cond.rule.allows(static_cast<int>(p))) region.outputs.offset(p) += cond.rule.big_m;
    }
  }
  return region;
}

std::vector<TreatmentCell> treatment_cells(const Region& region) {
  const Index K = region.outputs.weights.rows();
  std::vector<TreatmentCell> cells;
  for (Index i = 0; i < K; ++i) {
    TreatmentCell cell;
    cell.treatment = static_cast<int>(i);
    for (Index j = 0; j < K; ++j) {
      if (j == i) continue;
      const Vector wi = region.outputs.weights.row(i).transpose();
      const Vector wj = region.outputs.weights.row(j).transpose();
      const double ci = region.outputs.offset(i), cj = region.outputs.offset(j);
      if (j > i) {
        cell.comparisons.push_back({wi - wj, ci - cj, Sense::kNonPositive});
      } else {
        cell.comparisons.push_back({wj - wi, cj - ci, Sense::kPositive});
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<Region> partition(const Network& net, const Matrix& points) {
  std::vector<Region> regions;
  for (const auto& [pattern, count] : enumerate_patterns(net, points)) {
    Region r = region_halfspaces(net, pattern);
    r.support_count = count;
    regions.push_back(std::move(r));
  }
  return regions;
}

nlohmann::json to_json(const Halfspace& h) {
  return {{"omega", to_std(h.omega)},
          {"beta", h.beta},
          {"sense", h.sense == Sense::kPositive ? "> 0" : "<= 0"}};
}

nlohmann::json region_report(const std::vector<Region>& regions) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : regions) {
    nlohmann::json hs = nlohmann::json::array();
    for (const auto& h : r.halfspaces) hs.push_back(to_json(h));
    nlohmann::json conds = nlohmann::json::array();
    for (const auto& c : r.rule_conditions) conds.push_back({{"rule", c.index}, {"active", c.active}});
    nlohmann::json maps = nlohmann::json::array();
    for (Index p = 0; p < r.outputs.weights.rows(); ++p) {
      maps.push_back({{"treatment", p},
                      {"weights", to_std(r.outputs.weights.row(p).transpose())},
                      {"offset", r.outputs.offset(p)}});
    }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : treatment_cells(r)) {
      nlohmann::json ch = nlohmann::json::array();
      for (const auto& h : cell.comparisons) ch.push_back(to_json(h));
      cells.push_back({{"treatment", cell.treatment}, {"halfspaces", ch}});
    }
    out.push_back({{"pattern", r.pattern.to_string()},
                   {"support_count", r.support_count},
                   {"halfspaces", hs},
                   {"rule_conditions", conds},
                   {"outputs", maps},
                   {"treatment_cells", cells}});
  }
  return out;
}

}  // namespace prelu
