#include "prelu/model_io.hpp"

#include <fstream>
#include <sstream>

namespace prelu {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (!j.front().is_array()) throw ParseError(what + ": expected nested arrays");
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError(what + ": row " + std::to_string(i) + " has the wrong length");
    }
    for (Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw ParseError(what + ": non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  if (!m.allFinite()) throw ParseError(what + ": non-finite entry");
  return m;
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": non-numeric entry");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  if (!v.allFinite()) throw ParseError(what + ": non-finite entry");
  return v;
}

json layer_to_json(const Layer& layer) {
  json j{{"W", matrix_to_json(layer.W)}, {"b", vector_to_json(layer.b)}};
  if (layer.passthrough.size() != 0) {
    std::vector<bool> mask(static_cast<std::size_t>(layer.passthrough.size()));
    for (Index i = 0; i < layer.passthrough.size(); ++i) mask[static_cast<std::size_t>(i)] = layer.passthrough(i);
    j["passthrough"] = mask;
  }
  return j;
}

Layer layer_from_json(const json& j, const std::string& what) {
  Layer layer;
  layer.W = matrix_from_json(j.at("W"), what + ".W");
  layer.b = vector_from_json(j.at("b"), what + ".b");
  if (j.contains("passthrough")) {
    const auto mask = j.at("passthrough").get<std::vector<bool>>();
    layer.passthrough.resize(static_cast<Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) layer.passthrough(static_cast<Index>(i)) = mask[i];
  }
  return layer;
}

json standardization_to_json(const Standardization& s) {
  return {{"names", s.names}, {"mean", s.mean}, {"sd", s.sd}};
}

Standardization standardization_from_json(const json& j) {
  Standardization s;
  s.names = j.at("names").get<std::vector<std::string>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.sd = j.at("sd").get<std::vector<double>>();
  if (s.mean.size() != s.names.size() || s.sd.size() != s.names.size()) {
    throw ParseError("standardization: names, mean and sd must have equal length");
  }
  for (double sd : s.sd) {
    if (!(sd > 0.0)) throw ParseError("standardization: sd must be positive");
  }
  return s;
}

// Converts nlohmann's exceptions into ParseError with context.
template <typename F>
auto parsing(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

}  // namespace

json rule_to_json(const Rule& rule) {
  return {{"A", matrix_to_json(rule.A)}, {"b", vector_to_json(rule.b)}, {"allowed", rule.allowed}, {"M", rule.big_m}};
}

Rule rule_from_json(const json& j) {
  return parsing("rule", [&] {
    Rule rule;
    rule.A = matrix_from_json(j.at("A"), "rule.A");
    rule.b = vector_from_json(j.at("b"), "rule.b");
    rule.allowed = j.at("allowed").get<std::vector<int>>();
    std::sort(rule.allowed.begin(), rule.allowed.end());
    rule.allowed.erase(std::unique(rule.allowed.begin(), rule.allowed.end()), rule.allowed.end());
    rule.big_m = j.contains("M") ? j.at("M").get<double>() : kDefaultBigM;
    if (rule.b.size() != rule.A.rows()) throw ParseError("rule: b length must equal rows of A");
    if (rule.allowed.empty()) throw ParseError("rule: allowed set is empty");
    if (!(rule.big_m > 0.0)) throw ParseError("rule: M must be positive");
    return rule;
  });
}

json transform_to_json(const FeatureTransform& t) {
  return {{"name", t.name}, {"op", transform_op_name(t.op)}, {"args", t.args}};
}

FeatureTransform transform_from_json(const json& j) {
  return parsing("transform", [&] {
    FeatureTransform t;
    t.name = j.value("name", std::string());
    t.op = parse_transform_op(j.at("op").get<std::string>());
    t.args = j.at("args").get<std::vector<int>>();
    const std::size_t arity = t.op == TransformOp::kProduct ? 2 : 1;
    if (t.args.size() != arity) {
      throw ParseError("transform '" + t.name + "': " + transform_op_name(t.op) + " takes " +
                       std::to_string(arity) + " argument(s)");
    }
    return t;
  });
}

RuleSet rule_set_from_json(const json& j) {
  return parsing("rule file", [&] {
    RuleSet set;
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) set.rules.push_back(rule_from_json(r));
    }
    if (j.contains("transforms")) {
      for (const auto& t : j.at("transforms")) set.transforms.push_back(transform_from_json(t));
    }
    return set;
  });
}

json rule_set_to_json(const RuleSet& set) {
  json rules = json::array();
  for (const auto& r : set.rules) rules.push_back(rule_to_json(r));
  json transforms = json::array();
  for (const auto& t : set.transforms) transforms.push_back(transform_to_json(t));
  return {{"rules", rules}, {"transforms", transforms}};
}

json model_to_json(const Model& model) {
  const Network& net = model.net;
  json layers = json::array();
  for (Index l = 0; l < net.num_layers(); ++l) layers.push_back(layer_to_json(net.layer(l)));
  json constraints = json::array();
  for (const auto& r : net.rules()) constraints.push_back(rule_to_json(r));
  json j{{"d", net.input_dim()},
         {"K", net.num_treatments()},
         {"hidden_sizes", net.hidden_sizes()},
         {"layers", layers},
         {"constraints", constraints},
         {"seed", model.seed}};
  if (!model.transforms.empty()) {
    json transforms = json::array();
    for (const auto& t : model.transforms) transforms.push_back(transform_to_json(t));
    j["transforms"] = transforms;
  }
  j["standardization"] = model.standardization ? standardization_to_json(*model.standardization) : json(nullptr);
  return j;
}

Model model_from_json(const json& j) {
  return parsing("model", [&] {
    Model model;
    const Index d = j.at("d").get<Index>();
    const Index K = j.at("K").get<Index>();
    const auto sizes = j.at("hidden_sizes").get<std::vector<Index>>();
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != sizes.size() + 1) {
      throw ParseError("model: expected " + std::to_string(sizes.size() + 1) + " layers");
    }
    std::vector<Layer> hidden;
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      hidden.push_back(layer_from_json(layers[l], "layers[" + std::to_string(l) + "]"));
      if (hidden.back().W.rows() != sizes[l]) {
        throw ParseError("model: layer " + std::to_string(l) + " does not match hidden_sizes");
      }
    }
    Layer out = layer_from_json(layers.back(), "layers[" + std::to_string(sizes.size()) + "]");
    if (out.W.rows() != K) throw ParseError("model: output layer must have K rows");
    model.net = Network(d, std::move(hidden), std::move(out));
    try {
      model.net.validate();
      if (j.contains("constraints") && !j.at("constraints").is_null()) {
        for (const auto& r : j.at("constraints")) {
          Rule rule = rule_from_json(r);
          rule.validate(static_cast<int>(K));
          model.net.add_rule(std::move(rule));
        }
      }
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("model: ") + e.what());
    }
    if (j.contains("transforms")) {
      for (const auto& t : j.at("transforms")) model.transforms.push_back(transform_from_json(t));
    }
    if (j.contains("standardization") && !j.at("standardization").is_null()) {
      model.standardization = standardization_from_json(j.at("standardization"));
    }
    model.seed = j.value("seed", std::uint64_t{0});
    return model;
  });
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void save_model(const Model& model, const std::filesystem::path& path) { write_json(path, model_to_json(model)); }

Model load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

RuleSet load_rule_set(const std::filesystem::path& path) {
  try {
    return rule_set_from_json(read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace prelu
