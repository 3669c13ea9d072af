#pragma once

// Collapses a T x D feature sequence into 11 descriptive statistics per
// column, dimension-major.

#include <algorithm>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fatigue/common.hpp"
#include "fatigue/stats.hpp"

namespace fatigue::highfeat {

inline constexpr std::size_t kStatCount = 11;

inline constexpr std::array<std::string_view, kStatCount> kStatNames = {
    "p10", "p25", "p50", "p75", "p90", "mean", "min", "max", "std", "skew", "kurt"};

struct HighLevelVector {
  std::vector<double> values;
  std::vector<std::string> names;
};

inline std::vector<std::string> high_level_names(const std::vector<std::string>& base) {
  std::vector<std::string> names;
  names.reserve(base.size() * kStatCount);
  for (const auto& b : base)
    for (auto s : kStatNames) names.push_back(b + "__" + std::string(s));
  return names;
}

inline std::array<double, kStatCount> column_stats(std::span<const double> col) {
  std::vector<double> sorted(col.begin(), col.end());
  std::sort(sorted.begin(), sorted.end());
  // Moments on values shifted by the minimum: a constant column becomes
  // exactly zero, so its spread and shape statistics are exactly 0.
  std::vector<double> shifted(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) shifted[i] = sorted[i] - sorted.front();
  const double mean =
      std::clamp(sorted.front() + stats::mean(shifted), sorted.front(), sorted.back());
  return {stats::percentile_sorted(sorted, 0.10), stats::percentile_sorted(sorted, 0.25),
          stats::percentile_sorted(sorted, 0.50), stats::percentile_sorted(sorted, 0.75),
          stats::percentile_sorted(sorted, 0.90), mean,
          sorted.front(),
          sorted.back(),
          stats::stddev(shifted),
          stats::skewness(shifted),
          stats::kurtosis(shifted)};
}

// X must be free of missing values (impute first).
inline std::vector<double> descriptive_stats(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw InputError("descriptive statistics need T >= 2");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(X.cols()) * kStatCount);
  std::vector<double> col(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (Eigen::Index r = 0; r < X.rows(); ++r) col[static_cast<std::size_t>(r)] = X(r, c);
    const auto s = column_stats(col);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline HighLevelVector descriptive_stats(const Eigen::MatrixXd& X, const std::vector<std::string>& base_names) {
  if (static_cast<Eigen::Index>(base_names.size()) != X.cols()) throw ShapeError("feature names do not match X columns");
  return {descriptive_stats(X), high_level_names(base_names)};
}

}  // namespace fatigue::highfeat
