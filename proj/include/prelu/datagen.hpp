#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prelu/data.hpp"
#include "prelu/network.hpp"

namespace prelu {

inline constexpr Index kSyntheticFeatures = 20;

/// One of the six synthetic benchmark configurations.
struct DatasetSpec {
  int id = 1;
  int base_fn = 1;
  std::vector<int> effect_fns;  // one for K = 2, two for K = 3
  int num_treatments = 2;
  Index n_train = 10000;
  Index n_test = 5000;
  std::uint64_t seed = 0;
  double noise_sd = 1.0;

  /// Base/effect assignment for dataset `id` in 1..6.
  static DatasetSpec benchmark(int id, Index n_train = 10000, Index n_test = 5000, std::uint64_t seed = 0);
};

/// Noiseless outcomes of every treatment, one column per sample (K x n),
/// and the argmin treatment (lowest index on ties).
struct OracleTable {
  Matrix outcomes;
  std::vector<int> optimal;

  Index size() const { return outcomes.cols(); }
  Index num_treatments() const { return outcomes.rows(); }
};

/// Mean and standard deviation of each base/effect function on the training
/// population, in the order base, effect_1[, effect_2].
struct Standardization {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
};

/// Sub-stream seed derived from a user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// 20 x n features: x1, x3, ..., x19 standard normal; x2, ..., x20 Bernoulli(0.5).
Matrix gen_features(Index n, std::uint64_t seed);

/// Benchmark function f_k, k in 1..4, with 1-based feature names (x(0) is x1).
double eval_f(int k, const Eigen::Ref<const Vector>& x);

struct GeneratedOutcomes {
  OracleTable oracle;
  Standardization standardization;
};

/// Standardizes base/effect functions on X itself.
GeneratedOutcomes gen_outcomes(const DatasetSpec& spec, const Matrix& X);

/// Uses previously estimated statistics (e.g. from the training population).
OracleTable gen_outcomes(const DatasetSpec& spec, const Matrix& X, const Standardization& stats);

/// Outcome of every treatment from standardized base and effect values.
Vector outcome_vector(int num_treatments, double base, const std::vector<double>& effects);

/// Assignment probabilities given the noiseless outcome of treatment 0.
Vector propensity_probabilities(int num_treatments, double y0);

/// Confounded treatment assignment driven by the oracle's y0.
std::vector<int> assign_propensity(const DatasetSpec& spec, const Matrix& X, const OracleTable& oracle);

/// P[p] proportional to exp((p - 1) z), z the standardized score.
Vector score_probabilities(int num_treatments, double z);

/// Score-driven assignment on feature row `score_row` of X (d x n).
std::vector<int> score_propensity(const Matrix& X, Index score_row, int num_treatments, std::uint64_t seed);

struct SyntheticDataset {
  DatasetSpec spec;
  ObservationalData train;
  OracleTable train_oracle;
  Matrix test;  // 20 x n_test
  OracleTable test_oracle;
  Standardization standardization;
};

SyntheticDataset make_dataset(const DatasetSpec& spec);

struct DatasetPaths {
  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path oracle;
};

/// train.csv, test.csv and oracle.csv under `dir`.
DatasetPaths write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

void write_observational_csv(const ObservationalData& data, const std::filesystem::path& path);
void write_features_csv(const Matrix& X, const std::filesystem::path& path);
void write_oracle_csv(const OracleTable& oracle, const Standardization* stats,
                      const std::filesystem::path& path);

/// Header x1..xd,p,y. Throws ParseError naming the offending line.
ObservationalData load_observational_csv(const std::filesystem::path& path);

/// Header x1..xd. A trailing p,y pair (a train file) is ignored.
Matrix load_features_csv(const std::filesystem::path& path);

/// Header y_0..y_{K-1},optimal, optionally preceded by a `# standardization`
/// comment which fills `stats`.
OracleTable load_oracle_csv(const std::filesystem::path& path, Standardization* stats = nullptr);

}  // namespace prelu
