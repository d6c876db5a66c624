#include "prelu/baselines.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Cholesky>

#include "prelu/loss.hpp"

namespace prelu {

Vector RcLinearModel::predict(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != input_dim()) throw ShapeError("rc model: feature dimension mismatch");
  return coef.leftCols(input_dim()) * x + coef.col(input_dim());
}

Matrix RcLinearModel::predict_all(const Matrix& X) const {
  if (X.rows() != input_dim()) throw ShapeError("rc model: feature dimension mismatch");
  return (coef.leftCols(input_dim()) * X).colwise() + coef.col(input_dim());
}

int RcLinearModel::prescribe(const Eigen::Ref<const Vector>& x) const { return prelu::prescribe(predict(x)); }

RcLinearModel fit_rc_ols(const ObservationalData& data, int num_treatments) {
  data.validate(num_treatments);
  const Index d = data.dim();
  RcLinearModel model;
  model.coef.resize(num_treatments, d + 1);
  model.counts.assign(static_cast<std::size_t>(num_treatments), 0);
  model.regularized.assign(static_cast<std::size_t>(num_treatments), false);

  for (int arm = 0; arm < num_treatments; ++arm) {
    std::vector<Index> rows;
    for (Index t = 0; t < data.size(); ++t) {
      if (data.p[static_cast<std::size_t>(t)] == arm) rows.push_back(t);
    }
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw DataError("rc fit: treatment arm " + std::to_string(arm) + " has no samples");
    model.counts[static_cast<std::size_t>(arm)] = n;

    Matrix design(n, d + 1);
    Vector target(n);
    for (Index r = 0; r < n; ++r) {
      design.row(r).head(d) = data.X.col(rows[static_cast<std::size_t>(r)]).transpose();
      design(r, d) = 1.0;
      target(r) = data.y(rows[static_cast<std::size_t>(r)]);
    }
    const Matrix gram = design.transpose() * design;
    const Vector rhs = design.transpose() * target;

    Vector beta;
    bool ridge = n < d + 1;
    if (!ridge) {
      Eigen::LDLT<Matrix> ldlt(gram);
      // A pivot this small relative to the largest marks a singular design.
      const Vector diag = ldlt.vectorD().cwiseAbs();
      ridge = ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff());
      if (!ridge) beta = ldlt.solve(rhs);
    }
    if (ridge) {
      const Matrix reg = gram + kRidgeLambda * Matrix::Identity(d + 1, d + 1);
      beta = reg.ldlt().solve(rhs);
    }
    if (!beta.allFinite()) throw DataError("rc fit: non-finite coefficients for arm " + std::to_string(arm));
    model.coef.row(arm) = beta.transpose();
    model.regularized[static_cast<std::size_t>(arm)] = ridge;
  }
  return model;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"accuracy", accuracy},
                   {"mean_outcome", mean_outcome},
                   {"rows", rows},
                   {"correct", correct},
                   {"prescribed_counts", prescribed_counts}};
  j["prediction_mse"] = prediction_mse ? nlohmann::json(*prediction_mse) : nlohmann::json(nullptr);
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[96];
  auto row = [&](const char* key, const std::string& value) {
    std::snprintf(line, sizeof(line), "%-20s %14s\n", key, value.c_str());
    out << line;
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  row("accuracy (%)", num(accuracy));
  row("mean outcome", num(mean_outcome));
  row("prediction mse", prediction_mse ? num(*prediction_mse) : "n/a");
  row("rows", std::to_string(rows));
  row("correct", std::to_string(correct));
  for (std::size_t p = 0; p < prescribed_counts.size(); ++p) {
    row(("prescribed " + std::to_string(p)).c_str(), std::to_string(prescribed_counts[p]));
  }
  return out.str();
}

EvalReport evaluate_prescriptions(std::span<const int> prescriptions, const OracleTable& oracle,
                                  const Matrix* estimates) {
  const Index n = oracle.size();
  if (static_cast<Index>(prescriptions.size()) != n) {
    throw ContractError("evaluation: " + std::to_string(prescriptions.size()) + " prescriptions for " +
                        std::to_string(n) + " oracle rows");
  }
  if (n == 0) throw ContractError("evaluation: no rows");
  if (estimates && (estimates->cols() != n || estimates->rows() != oracle.num_treatments())) {
    throw ContractError("evaluation: estimates must be K x n");
  }
  EvalReport report;
  report.rows = n;
  report.prescribed_counts.assign(static_cast<std::size_t>(oracle.num_treatments()), 0);
  double outcome = 0.0, sq = 0.0;
  for (Index t = 0; t < n; ++t) {
    const int p = prescriptions[static_cast<std::size_t>(t)];
    if (p < 0 || p >= oracle.num_treatments()) throw ContractError("evaluation: treatment out of range");
    ++report.prescribed_counts[static_cast<std::size_t>(p)];
    if (p == oracle.optimal[static_cast<std::size_t>(t)]) ++report.correct;
    outcome += oracle.outcomes(p, t);
    if (estimates) {
      const double r = oracle.outcomes(p, t) - (*estimates)(p, t);
      sq += r * r;
    }
  }
  report.accuracy = 100.0 * static_cast<double>(report.correct) / static_cast<double>(n);
  report.mean_outcome = outcome / static_cast<double>(n);
  if (estimates) report.prediction_mse = sq / static_cast<double>(n);
  return report;
}

EvalReport evaluate_policy(const Policy& policy, const Matrix& X, const OracleTable& oracle) {
  if (X.cols() != oracle.size()) throw ContractError("evaluation: feature rows do not align with oracle rows");
  std::vector<int> prescriptions(static_cast<std::size_t>(X.cols()));
  for (Index t = 0; t < X.cols(); ++t) prescriptions[static_cast<std::size_t>(t)] = policy(X.col(t));
  return evaluate_prescriptions(prescriptions, oracle);
}

EvalReport evaluate_policy(const Network& net, const Matrix& X, const OracleTable& oracle) {
  if (X.cols() != oracle.size()) throw ContractError("evaluation: feature rows do not align with oracle rows");
  const Matrix outputs = forward_batch(net, X).outputs;
  std::vector<int> prescriptions(static_cast<std::size_t>(X.cols()));
  for (Index t = 0; t < X.cols(); ++t) prescriptions[static_cast<std::size_t>(t)] = prescribe(outputs.col(t));
  return evaluate_prescriptions(prescriptions, oracle, &outputs);
}

EvalReport evaluate_policy(const RcLinearModel& model, const Matrix& X, const OracleTable& oracle) {
  if (X.cols() != oracle.size()) throw ContractError("evaluation: feature rows do not align with oracle rows");
  const Matrix outputs = model.predict_all(X);
  std::vector<int> prescriptions(static_cast<std::size_t>(X.cols()));
  for (Index t = 0; t < X.cols(); ++t) prescriptions[static_cast<std::size_t>(t)] = prescribe(outputs.col(t));
  return evaluate_prescriptions(prescriptions, oracle, &outputs);
}

}  // namespace prelu
