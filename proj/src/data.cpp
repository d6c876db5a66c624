#include "prelu/data.hpp"

#include <cmath>
#include <string>

namespace prelu {

ObservationalData ObservationalData::from_samples(std::span<const Sample> samples) {
  ObservationalData data;
  if (samples.empty()) return data;
  const Index d = samples.front().x.size();
  data.X.resize(d, static_cast<Index>(samples.size()));
  data.y.resize(static_cast<Index>(samples.size()));
  data.p.reserve(samples.size());
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (samples[t].x.size() != d) {
      throw ShapeError("sample " + std::to_string(t) + " has inconsistent dimension");
    }
    data.X.col(static_cast<Index>(t)) = samples[t].x;
    data.y(static_cast<Index>(t)) = samples[t].y;
    data.p.push_back(samples[t].p);
  }
  return data;
}

ObservationalData ObservationalData::subset(std::span<const Index> rows) const {
  ObservationalData out;
  out.X.resize(dim(), static_cast<Index>(rows.size()));
  out.y.resize(static_cast<Index>(rows.size()));
  out.p.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.col(static_cast<Index>(i)) = X.col(rows[i]);
    out.y(static_cast<Index>(i)) = y(rows[i]);
    out.p.push_back(p[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

void ObservationalData::validate(Index num_treatments) const {
  if (static_cast<Index>(p.size()) != X.cols() || y.size() != X.cols()) {
    throw DataError("observational data: feature, treatment and outcome counts differ");
  }
  for (Index t = 0; t < X.cols(); ++t) {
    const int pt = p[static_cast<std::size_t>(t)];
    if (pt < 0 || pt >= num_treatments) {
      throw DataError("row " + std::to_string(t + 1) + ": treatment " + std::to_string(pt) +
                      " outside [0, " + std::to_string(num_treatments) + ")");
    }
    if (!std::isfinite(y(t)) || !X.col(t).allFinite()) {
      throw DataError("row " + std::to_string(t + 1) + ": non-finite value");
    }
  }
}

}  // namespace prelu
