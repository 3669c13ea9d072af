#pragma once

// Least squares and LASSO for the interpretable path.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fatigue/common.hpp"

namespace fatigue::linreg {

// Per-column affine standardization fitted on training rows. Constant
// columns map to 0 and are flagged.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    s.constant.assign(static_cast<std::size_t>(X.cols()), false);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
      const double sd = std::sqrt(var);
      if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))))) {
        s.constant[static_cast<std::size_t>(j)] = true;
        s.scale(j) = 1.0;
      } else {
        s.scale(j) = sd;
      }
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != mean.size()) throw ShapeError("standardizer width mismatch");
    Eigen::MatrixXd Z = (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
      if (constant[static_cast<std::size_t>(j)]) Z.col(j).setZero();
    return Z;
  }
};

struct LinearModel {
  Eigen::VectorXd weights;  // on standardized features
  double intercept = 0.0;
  std::vector<std::string> feature_names;
  Standardizer standardizer;

  // Weight and intercept in the original feature units.
  Eigen::VectorXd raw_weights() const { return weights.array() / standardizer.scale.array(); }
  double raw_intercept() const { return intercept - raw_weights().dot(standardizer.mean); }
};

// Minimum-norm least squares with an unpenalized intercept, solved by a
// complete orthogonal decomposition of the standardized design.
inline LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<std::string> names = {}) {
  if (X.rows() == 0) throw InputError("fit_ols: no rows");
  if (X.rows() != y.size()) throw ShapeError("fit_ols: X and y row counts differ");
  if (names.empty())
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw ShapeError("fit_ols: feature name count");
  LinearModel m;
  m.feature_names = std::move(names);
  m.standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = m.standardizer.apply(X);
  const double ybar = y.mean();
  m.intercept = ybar;
  if (X.cols() == 0) {
    m.weights.resize(0);
    return m;
  }
  const Eigen::VectorXd yc = y.array() - ybar;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Z);
  m.weights = cod.solve(yc);
  for (Eigen::Index j = 0; j < m.weights.size(); ++j)
    if (m.standardizer.constant[static_cast<std::size_t>(j)]) m.weights(j) = 0.0;
  return m;
}

inline Eigen::VectorXd predict(const LinearModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.weights.size()) throw ShapeError("predict: width mismatch");
  if (X.cols() == 0) return Eigen::VectorXd::Constant(X.rows(), m.intercept);
  return (m.standardizer.apply(X) * m.weights).array() + m.intercept;
}

inline Eigen::VectorXd predict(const LinearModel& m, const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  if (names != m.feature_names) throw SchemaError("predict: feature names do not match the fitted model");
  return predict(m, X);
}

inline nlohmann::json to_json(const LinearModel& m) {
  return {{"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
          {"intercept", m.intercept},
          {"feature_names", m.feature_names},
          {"mean", std::vector<double>(m.standardizer.mean.data(), m.standardizer.mean.data() + m.standardizer.mean.size())},
          {"scale", std::vector<double>(m.standardizer.scale.data(), m.standardizer.scale.data() + m.standardizer.scale.size())},
          {"constant", m.standardizer.constant}};
}

inline LinearModel linear_model_from_json(const nlohmann::json& j) {
  LinearModel m;
  auto vec = [](const std::vector<double>& v) { return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))); };
  m.weights = vec(j.at("weights").get<std::vector<double>>());
  m.intercept = j.at("intercept").get<double>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.standardizer.mean = vec(j.at("mean").get<std::vector<double>>());
  m.standardizer.scale = vec(j.at("scale").get<std::vector<double>>());
  m.standardizer.constant = j.at("constant").get<std::vector<bool>>();
  return m;
}

// ---------------------------------------------------------------------------
// LASSO

struct LassoOptions {
  double tolerance = 1e-7;   // max |delta w| per sweep
  int max_sweeps = 10'000;
  bool check_input = true;
  bool track_objective = false;
};

struct LassoResult {
  Eigen::VectorXd weights;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective;  // per sweep, when tracked
};

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

inline double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              double lambda) {
  const double n = static_cast<double>(X.rows());
  return (y - X * w).squaredNorm() / (2.0 * n) + lambda * w.lpNorm<1>();
}

// Smallest penalty whose solution is all zeros: max_j |x_j^T y| / n.
inline double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  // Same per-column expression as the first coordinate-descent sweep, so a
  // fit at exactly lambda_max stays at zero.
  double mx = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    mx = std::max(mx, std::abs(X.col(j).dot(y) / static_cast<double>(X.rows()) + 0.0));
  return mx;
}

inline void check_standardized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(X.rows());
  constexpr double tol = 1e-6;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double m = X.col(j).mean();
    const double var = X.col(j).squaredNorm() / n - m * m;
    if (std::abs(m) > tol || std::abs(var - 1.0) > tol)
      throw ContractError("lasso_fit: column " + std::to_string(j) + " is not standardized");
  }
  if (std::abs(y.mean()) > tol * std::max(1.0, y.cwiseAbs().maxCoeff()))
    throw ContractError("lasso_fit: y is not centered");
}

// Minimizes (1/2n)||y - Xw||^2 + lambda ||w||_1 by cyclic coordinate descent
// with soft-thresholding. Columns must be zero-mean and unit (population)
// variance, so each coordinate update is a single soft-threshold.
inline LassoResult lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                             const LassoOptions& opt = {}, const Eigen::VectorXd* warm_start = nullptr) {
  if (X.rows() != y.size()) throw ShapeError("lasso_fit: X and y row counts differ");
  if (lambda < 0.0) throw InputError("lasso_fit: negative penalty");
  if (opt.check_input) check_standardized(X, y);
  const auto p = X.cols();
  const double n = static_cast<double>(X.rows());
  LassoResult res;
  res.weights = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y - X * res.weights;
  for (res.sweeps = 0; res.sweeps < opt.max_sweeps;) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = res.weights(j);
      const double rho = X.col(j).dot(r) / n + old;
      const double w = soft_threshold(rho, lambda);
      if (w != old) {
        r.noalias() -= X.col(j) * (w - old);
        res.weights(j) = w;
        max_delta = std::max(max_delta, std::abs(w - old));
      }
    }
    ++res.sweeps;
    if (opt.track_objective) {
      res.objective.push_back(lasso_objective(X, y, res.weights, lambda));
#ifndef NDEBUG
      const auto k = res.objective.size();
      assert(k < 2 || res.objective[k - 1] <= res.objective[k - 2] * (1.0 + 1e-12) + 1e-15);
#endif
    }
    if (max_delta < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace fatigue::linreg
