#include "prelu/constraints.hpp"

#include <cmath>
#include <iostream>

namespace prelu {

int indicator(const Rule& rule, const Eigen::Ref<const Vector>& x) {
  return rule.indicator(x) ? 1 : 0;
}

Network inject_rule(Network net, const Rule& rule) {
  if (static_cast<Index>(rule.allowed.size()) == net.num_treatments()) {
    std::clog << "warning: rule allows every treatment and has no effect\n";
  }
  net.add_rule(rule);
  return net;
}

std::pair<double, double> output_range(const Network& net, const InputBounds& bounds) {
  if (bounds.lo.size() != net.input_dim() || bounds.hi.size() != net.input_dim()) {
    throw ShapeError("bounds must have one interval per feature");
  }
  if (!bounds.lo.allFinite() || !bounds.hi.allFinite()) {
    throw ContractError("compute_big_m needs finite input bounds");
  }
  if ((bounds.lo.array() > bounds.hi.array()).any()) {
    throw ContractError("input bounds have lo > hi");
  }
  Vector lo = bounds.lo, hi = bounds.hi;
  for (Index l = 0; l < net.num_layers(); ++l) {
    const Layer& layer = net.layer(l);
    const Matrix pos = layer.W.cwiseMax(0.0);
    const Matrix neg = layer.W.cwiseMin(0.0);
    Vector next_lo = pos * lo + neg * hi + layer.b;
    Vector next_hi = pos * hi + neg * lo + layer.b;
    if (l + 1 < net.num_layers()) {
      for (Index j = 0; j < next_lo.size(); ++j) {
        if (layer.is_relu(j)) {
          next_lo(j) = std::max(next_lo(j), 0.0);
          next_hi(j) = std::max(next_hi(j), 0.0);
        }
      }
    }
    lo = std::move(next_lo);
    hi = std::move(next_hi);
  }
  return {lo.minCoeff(), hi.maxCoeff()};
}

double compute_big_m(const Network& net, const InputBounds& bounds) {
  const auto [lo, hi] = output_range(net, bounds);
  return std::max(hi - lo, 1.0);
}

FilterResult filter_violating(const ObservationalData& data, const std::vector<Rule>& rules) {
  std::vector<Index> keep, drop;
  for (Index t = 0; t < data.size(); ++t) {
    bool violates = false;
    for (const auto& rule : rules) {
      if (rule.indicator(data.X.col(t)) && !rule.allows(data.p[static_cast<std::size_t>(t)])) {
        violates = true;
        break;
      }
    }
    (violates ? drop : keep).push_back(t);
  }
  return {data.subset(keep), data.subset(drop)};
}

Vector apply_transforms(const FeatureTransformSpec& spec, const Eigen::Ref<const Vector>& x,
                        Index sample) {
  Vector out(x.size() + static_cast<Index>(spec.size()));
  out.head(x.size()) = x;
  Index n = x.size();
  auto arg = [&](const FeatureTransform& t, std::size_t i) {
    if (i >= t.args.size() || t.args[i] < 0 || t.args[i] >= n) {
      throw ContractError("transform '" + t.name + "' references a missing feature");
    }
    return out(t.args[i]);
  };
  for (const auto& t : spec) {
    double v = 0.0;
    switch (t.op) {
      case TransformOp::kSquare: {
        const double a = arg(t, 0);
        v = a * a;
        break;
      }
      case TransformOp::kLog: {
        const double a = arg(t, 0);
        if (!(a > 0.0)) {
          throw DataError("transform '" + t.name + "': log of nonpositive value " +
                          std::to_string(a) +
                          (sample >= 0 ? " in sample " + std::to_string(sample) : std::string()));
        }
        v = std::log(a);
        break;
      }
      case TransformOp::kProduct:
        v = arg(t, 0) * arg(t, 1);
        break;
    }
    out(n++) = v;
  }
  return out;
}

Matrix apply_transforms_all(const FeatureTransformSpec& spec, const Matrix& X) {
  Matrix out(X.rows() + static_cast<Index>(spec.size()), X.cols());
  for (Index c = 0; c < X.cols(); ++c) out.col(c) = apply_transforms(spec, X.col(c), c);
  return out;
}

std::string transform_op_name(TransformOp op) {
  switch (op) {
    case TransformOp::kSquare: return "square";
    case TransformOp::kLog: return "log";
    case TransformOp::kProduct: return "product";
  }
  return "?";
}

TransformOp parse_transform_op(const std::string& name) {
  if (name == "square") return TransformOp::kSquare;
  if (name == "log") return TransformOp::kLog;
  if (name == "product") return TransformOp::kProduct;
  throw ParseError("unknown transform op '" + name + "'");
}

}  // namespace prelu
