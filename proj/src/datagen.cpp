#include "prelu/datagen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "prelu/loss.hpp"

namespace prelu {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double indicator(bool b) { return b ? 1.0 : 0.0; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, const std::filesystem::path& path, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
  std::vector<std::string> comments;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    if (line.front() == '#') {
      t.comments.push_back(line);
      continue;
    }
    auto fields = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": expected " +
                       std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(n);
  }
  if (t.header.empty()) throw ParseError(path.string() + ": missing header");
  return t;
}

// Number of leading x1..xd columns.
Index feature_columns(const CsvTable& t, const std::filesystem::path& path) {
  Index d = 0;
  while (d < static_cast<Index>(t.header.size()) && t.header[static_cast<std::size_t>(d)] == "x" + std::to_string(d + 1)) ++d;
  if (d == 0) throw ParseError(path.string() + ":1: header must start with x1");
  return d;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

double sample_mean(const Vector& v) { return v.mean(); }

double sample_sd(const Vector& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

std::vector<int> function_list(const DatasetSpec& spec) {
  std::vector<int> fns{spec.base_fn};
  fns.insert(fns.end(), spec.effect_fns.begin(), spec.effect_fns.end());
  return fns;
}

void validate(const DatasetSpec& spec) {
  if (spec.num_treatments != 2 && spec.num_treatments != 3) {
    throw ContractError("synthetic datasets have K = 2 or 3");
  }
  if (static_cast<int>(spec.effect_fns.size()) != spec.num_treatments - 1) {
    throw ContractError("need K - 1 effect functions");
  }
  if (spec.n_train < 2 || spec.n_test < 1) throw ContractError("dataset sizes too small");
}

}  // namespace

DatasetSpec DatasetSpec::benchmark(int id, Index n_train, Index n_test, std::uint64_t seed) {
  DatasetSpec s;
  s.id = id;
  s.n_train = n_train;
  s.n_test = n_test;
  s.seed = seed;
  switch (id) {
    case 1: s.base_fn = 1; s.effect_fns = {2}; break;
    case 2: s.base_fn = 4; s.effect_fns = {2}; break;
    case 3: s.base_fn = 3; s.effect_fns = {4}; break;
    case 4: s.base_fn = 1; s.effect_fns = {3}; break;
    case 5: s.base_fn = 2; s.effect_fns = {1, 3}; break;
    case 6: s.base_fn = 2; s.effect_fns = {3, 4}; break;
    default: throw ContractError("dataset id must be in 1..6, got " + std::to_string(id));
  }
  s.num_treatments = static_cast<int>(s.effect_fns.size()) + 1;
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Matrix gen_features(Index n, std::uint64_t seed) {
  if (n < 1) throw ContractError("gen_features: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Matrix X(kSyntheticFeatures, n);
  for (Index t = 0; t < n; ++t) {
    for (Index k = 0; k < kSyntheticFeatures; ++k) {
      // Row k holds feature x_{k+1}: odd-numbered features are Gaussian.
      X(k, t) = (k % 2 == 0) ? gauss(rng) : indicator(coin(rng));
    }
  }
  return X;
}

double eval_f(int k, const Eigen::Ref<const Vector>& x) {
  if (x.size() < 9) throw ShapeError("benchmark functions need at least 9 features");
  auto f = [&](int i) { return x(i - 1); };
  switch (k) {
    case 1:
      return 5.0 * indicator(f(1) > 1.0) - 5.0;
    case 2:
      return 4.0 * indicator(f(1) > 1.0) * indicator(f(3) > 0.0) +
             4.0 * indicator(f(5) > 1.0) * indicator(f(7) > 0.0) + 2.0 * f(8) * f(9);
    case 3:
      return 0.5 * (f(1) * f(1) + f(2) + f(3) * f(3) + f(4) + f(5) * f(5) + f(6) + f(7) * f(7) +
                    f(8) + f(9) * f(9) - 11.0);
    case 4: {
      const double a = f(2), b = f(4), c = f(6);
      return a * b * c + 2 * a * b * (1 - c) + 3 * a * (1 - b) * c + 4 * a * (1 - b) * (1 - c) +
             5 * (1 - a) * b * c + 6 * (1 - a) * b * (1 - c) + 7 * (1 - a) * (1 - b) * c +
             8 * (1 - a) * (1 - b) * (1 - c);
    }
    default:
      throw ContractError("benchmark function id must be in 1..4, got " + std::to_string(k));
  }
}

Vector outcome_vector(int num_treatments, double base, const std::vector<double>& effects) {
  Vector y(num_treatments);
  if (num_treatments == 2) {
    for (int p = 0; p < 2; ++p) y(p) = base + (p - 0.5) * effects.at(0);
  } else if (num_treatments == 3) {
    for (int p = 0; p < 3; ++p) {
      y(p) = base + p * (2 - p) * effects.at(0) + 0.5 * p * (p - 1) * effects.at(1);
    }
  } else {
    throw ContractError("outcome model defined for K = 2 or 3");
  }
  return y;
}

GeneratedOutcomes gen_outcomes(const DatasetSpec& spec, const Matrix& X) {
  validate(spec);
  if (X.cols() < 2) throw DataError("standardization needs at least two samples");
  const auto fns = function_list(spec);
  Standardization stats;
  for (std::size_t k = 0; k < fns.size(); ++k) {
    Vector values(X.cols());
    for (Index t = 0; t < X.cols(); ++t) values(t) = eval_f(fns[k], X.col(t));
    const double sd = sample_sd(values);
    if (!(sd > 0.0)) {
      throw DataError("f" + std::to_string(fns[k]) + " is constant on the sample; cannot standardize");
    }
    stats.names.push_back((k == 0 ? std::string("base_f") : "effect" + std::to_string(k) + "_f") +
                          std::to_string(fns[k]));
    stats.mean.push_back(sample_mean(values));
    stats.sd.push_back(sd);
  }
  GeneratedOutcomes out;
  out.oracle = gen_outcomes(spec, X, stats);
  out.standardization = std::move(stats);
  return out;
}

OracleTable gen_outcomes(const DatasetSpec& spec, const Matrix& X, const Standardization& stats) {
  validate(spec);
  const auto fns = function_list(spec);
  if (stats.mean.size() != fns.size() || stats.sd.size() != fns.size()) {
    throw ContractError("standardization does not match the dataset's functions");
  }
  OracleTable oracle;
  oracle.outcomes.resize(spec.num_treatments, X.cols());
  oracle.optimal.resize(static_cast<std::size_t>(X.cols()));
  std::vector<double> effects(fns.size() - 1);
  for (Index t = 0; t < X.cols(); ++t) {
    auto standardized = [&](std::size_t k) { return (eval_f(fns[k], X.col(t)) - stats.mean[k]) / stats.sd[k]; };
    const double base = standardized(0);
    for (std::size_t k = 1; k < fns.size(); ++k) effects[k - 1] = standardized(k);
    oracle.outcomes.col(t) = outcome_vector(spec.num_treatments, base, effects);
    oracle.optimal[static_cast<std::size_t>(t)] = prescribe(oracle.outcomes.col(t));
  }
  return oracle;
}

Vector propensity_probabilities(int num_treatments, double y0) {
  Vector prob(num_treatments);
  // Logistic written to stay finite for large |y0|.
  const double treated = y0 >= 0 ? 1.0 / (1.0 + std::exp(-y0)) : std::exp(y0) / (1.0 + std::exp(y0));
  if (num_treatments == 2) {
    prob << 1.0 - treated, treated;
  } else if (num_treatments == 3) {
    const double p0 = 1.0 - treated;  // 1 / (1 + e^{y0})
    prob << p0, 0.5 * (1.0 - p0), 0.5 * (1.0 - p0);
  } else {
    throw ContractError("propensity model defined for K = 2 or 3");
  }
  return prob;
}

std::vector<int> assign_propensity(const DatasetSpec& spec, const Matrix& X, const OracleTable& oracle) {
  if (oracle.size() != X.cols()) throw ContractError("oracle rows must align with features");
  std::mt19937_64 rng(derive_seed(spec.seed, 3));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> p(static_cast<std::size_t>(X.cols()));
  for (Index t = 0; t < X.cols(); ++t) {
    const Vector prob = propensity_probabilities(spec.num_treatments, oracle.outcomes(0, t));
    const double r = u(rng);
    double acc = 0.0;
    int chosen = spec.num_treatments - 1;
    for (int k = 0; k < spec.num_treatments; ++k) {
      acc += prob(k);
      if (r < acc) {
        chosen = k;
        break;
      }
    }
    p[static_cast<std::size_t>(t)] = chosen;
  }
  return p;
}

Vector score_probabilities(int num_treatments, double z) {
  if (num_treatments < 2) throw ContractError("need at least two treatments");
  Vector logits(num_treatments);
  for (int p = 0; p < num_treatments; ++p) logits(p) = (p - 1) * z;
  const double top = logits.maxCoeff();
  Vector w = (logits.array() - top).exp();
  return w / w.sum();
}

std::vector<int> score_propensity(const Matrix& X, Index score_row, int num_treatments, std::uint64_t seed) {
  if (score_row < 0 || score_row >= X.rows()) throw ContractError("score feature out of range");
  if (X.cols() < 2) throw DataError("score propensity needs at least two samples");
  const Vector s = X.row(score_row).transpose();
  const double mu = sample_mean(s);
  const double sigma = sample_sd(s);
  if (!(sigma > 0.0)) throw DataError("score feature has zero standard deviation");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> p(static_cast<std::size_t>(X.cols()));
  for (Index t = 0; t < X.cols(); ++t) {
    const Vector prob = score_probabilities(num_treatments, (s(t) - mu) / sigma);
    const double r = u(rng);
    double acc = 0.0;
    int chosen = num_treatments - 1;
    for (int k = 0; k < num_treatments; ++k) {
      acc += prob(k);
      if (r < acc) {
        chosen = k;
        break;
      }
    }
    p[static_cast<std::size_t>(t)] = chosen;
  }
  return p;
}

SyntheticDataset make_dataset(const DatasetSpec& spec) {
  validate(spec);
  SyntheticDataset ds;
  ds.spec = spec;
  const Matrix train_X = gen_features(spec.n_train, derive_seed(spec.seed, 1));
  auto train_out = gen_outcomes(spec, train_X);
  ds.standardization = std::move(train_out.standardization);
  ds.train_oracle = std::move(train_out.oracle);

  ds.train.X = train_X;
  ds.train.p = assign_propensity(spec, train_X, ds.train_oracle);
  ds.train.y.resize(spec.n_train);
  std::mt19937_64 noise_rng(derive_seed(spec.seed, 4));
  std::normal_distribution<double> noise(0.0, spec.noise_sd);
  for (Index t = 0; t < spec.n_train; ++t) {
    ds.train.y(t) = ds.train_oracle.outcomes(ds.train.p[static_cast<std::size_t>(t)], t) + noise(noise_rng);
  }

  ds.test = gen_features(spec.n_test, derive_seed(spec.seed, 2));
  ds.test_oracle = gen_outcomes(spec, ds.test, ds.standardization);
  return ds;
}

void write_observational_csv(const ObservationalData& data, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (Index k = 0; k < data.dim(); ++k) out << "x" << (k + 1) << ",";
  out << "p,y\n";
  for (Index t = 0; t < data.size(); ++t) {
    for (Index k = 0; k < data.dim(); ++k) out << fmt17(data.X(k, t)) << ",";
    out << data.p[static_cast<std::size_t>(t)] << "," << fmt17(data.y(t)) << "\n";
  }
}

void write_features_csv(const Matrix& X, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (Index k = 0; k < X.rows(); ++k) out << (k ? "," : "") << "x" << (k + 1);
  out << "\n";
  for (Index t = 0; t < X.cols(); ++t) {
    for (Index k = 0; k < X.rows(); ++k) out << (k ? "," : "") << fmt17(X(k, t));
    out << "\n";
  }
}

void write_oracle_csv(const OracleTable& oracle, const Standardization* stats,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  if (stats) {
    out << "# standardization (training population)";
    for (std::size_t k = 0; k < stats->names.size(); ++k) {
      out << " " << stats->names[k] << "=" << fmt17(stats->mean[k]) << ":" << fmt17(stats->sd[k]);
    }
    out << "\n";
  }
  for (Index p = 0; p < oracle.num_treatments(); ++p) out << "y_" << p << ",";
  out << "optimal\n";
  for (Index t = 0; t < oracle.size(); ++t) {
    for (Index p = 0; p < oracle.num_treatments(); ++p) out << fmt17(oracle.outcomes(p, t)) << ",";
    out << oracle.optimal[static_cast<std::size_t>(t)] << "\n";
  }
}

DatasetPaths write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
  DatasetPaths paths{dir / "train.csv", dir / "test.csv", dir / "oracle.csv"};
  write_observational_csv(data.train, paths.train);
  write_features_csv(data.test, paths.test);
  write_oracle_csv(data.test_oracle, &data.standardization, paths.oracle);
  return paths;
}

ObservationalData load_observational_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const Index d = feature_columns(t, path);
  if (static_cast<Index>(t.header.size()) != d + 2 || t.header[static_cast<std::size_t>(d)] != "p" ||
      t.header[static_cast<std::size_t>(d + 1)] != "y") {
    throw ParseError(path.string() + ":1: header must be x1..xd,p,y");
  }
  ObservationalData data;
  const Index n = static_cast<Index>(t.rows.size());
  data.X.resize(d, n);
  data.y.resize(n);
  data.p.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    const int line = t.line_numbers[static_cast<std::size_t>(r)];
    for (Index k = 0; k < d; ++k) data.X(k, r) = parse_double(row[static_cast<std::size_t>(k)], path, line);
    data.p[static_cast<std::size_t>(r)] = parse_int(row[static_cast<std::size_t>(d)], path, line);
    if (data.p[static_cast<std::size_t>(r)] < 0) {
      throw ParseError(path.string() + ":" + std::to_string(line) + ": negative treatment");
    }
    data.y(r) = parse_double(row[static_cast<std::size_t>(d + 1)], path, line);
  }
  return data;
}

Matrix load_features_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const Index d = feature_columns(t, path);
  const Index n = static_cast<Index>(t.rows.size());
  Matrix X(d, n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    for (Index k = 0; k < d; ++k) {
      X(k, r) = parse_double(row[static_cast<std::size_t>(k)], path, t.line_numbers[static_cast<std::size_t>(r)]);
    }
  }
  return X;
}

OracleTable load_oracle_csv(const std::filesystem::path& path, Standardization* stats) {
  const CsvTable t = read_csv(path);
  Index K = 0;
  while (K < static_cast<Index>(t.header.size()) && t.header[static_cast<std::size_t>(K)] == "y_" + std::to_string(K)) ++K;
  if (K < 2 || static_cast<Index>(t.header.size()) != K + 1 || t.header.back() != "optimal") {
    throw ParseError(path.string() + ":1: header must be y_0..y_{K-1},optimal");
  }
  OracleTable oracle;
  const Index n = static_cast<Index>(t.rows.size());
  oracle.outcomes.resize(K, n);
  oracle.optimal.resize(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    const int line = t.line_numbers[static_cast<std::size_t>(r)];
    for (Index p = 0; p < K; ++p) oracle.outcomes(p, r) = parse_double(row[static_cast<std::size_t>(p)], path, line);
    const int opt = parse_int(row.back(), path, line);
    if (opt < 0 || opt >= K) {
      throw ParseError(path.string() + ":" + std::to_string(line) + ": optimal treatment out of range");
    }
    oracle.optimal[static_cast<std::size_t>(r)] = opt;
  }
  if (stats) {
    *stats = {};
    for (const auto& c : t.comments) {
      if (c.rfind("# standardization", 0) != 0) continue;
      std::istringstream in(c.substr(c.find(')') + 1));
      std::string tok;
      while (in >> tok) {
        const auto eq = tok.find('='), colon = tok.rfind(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
          throw ParseError(path.string() + ": malformed standardization comment");
        }
        stats->names.push_back(tok.substr(0, eq));
        stats->mean.push_back(parse_double(tok.substr(eq + 1, colon - eq - 1), path, 1));
        stats->sd.push_back(parse_double(tok.substr(colon + 1), path, 1));
      }
    }
  }
  return oracle;
}

}  // namespace prelu
