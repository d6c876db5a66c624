#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prelu/data.hpp"
#include "prelu/datagen.hpp"
#include "prelu/network.hpp"

namespace prelu {

/// Regress-and-compare with one least-squares model per treatment.
struct RcLinearModel {
  Matrix coef;                    // K x (d + 1): slopes, then intercept
  std::vector<Index> counts;      // samples per arm
  std::vector<bool> regularized;  // arm solved with the ridge fallback

  Index num_treatments() const { return coef.rows(); }
  Index input_dim() const { return coef.cols() - 1; }

  Vector predict(const Eigen::Ref<const Vector>& x) const;
  Matrix predict_all(const Matrix& X) const;  // K x n
  int prescribe(const Eigen::Ref<const Vector>& x) const;
};

inline constexpr double kRidgeLambda = 1e-6;

/// Normal equations per arm. Arms with fewer than d + 1 samples or a
/// singular design get a ridge term of kRidgeLambda. An arm without samples
/// raises DataError.
RcLinearModel fit_rc_ols(const ObservationalData& data, int num_treatments);

struct EvalReport {
  double accuracy = 0.0;      // percent of rows prescribed the oracle optimum
  double mean_outcome = 0.0;  // mean oracle outcome of the prescribed arm
  std::optional<double> prediction_mse;
  Index rows = 0;
  Index correct = 0;
  std::vector<Index> prescribed_counts;  // per treatment

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// `estimates` (K x n), when present, yields the squared error on the
/// prescribed arm against the oracle outcome.
EvalReport evaluate_prescriptions(std::span<const int> prescriptions, const OracleTable& oracle,
                                  const Matrix* estimates = nullptr);

using Policy = std::function<int(const Eigen::Ref<const Vector>&)>;

EvalReport evaluate_policy(const Policy& policy, const Matrix& X, const OracleTable& oracle);

/// Network policy; its outputs double as outcome estimates.
EvalReport evaluate_policy(const Network& net, const Matrix& X, const OracleTable& oracle);
EvalReport evaluate_policy(const RcLinearModel& model, const Matrix& X, const OracleTable& oracle);

}  // namespace prelu
