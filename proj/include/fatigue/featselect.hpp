#pragma once

// Coarse-to-fine feature selection for the high-level feature matrix:
//   1. pairwise Pearson correlation among features
//   2. group features connected by |corr| > threshold
//   3. correlation of each feature with the target
//   4. keep the strongest target correlate of each group (the champion)
//   5. LASSO over the champions, penalty picked by inner cross-validation

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fatigue/common.hpp"
#include "fatigue/linreg.hpp"

namespace fatigue::featselect {

namespace detail {

// Columns centred and scaled to unit Euclidean norm; zero-variance columns
// become all-zero.
inline Eigen::MatrixXd unit_columns(const Eigen::MatrixXd& X, std::vector<bool>& zero_var) {
  Eigen::MatrixXd Z = X.rowwise() - X.colwise().mean();
  zero_var.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double norm = Z.col(j).norm();
    const double scale = std::max(1.0, X.col(j).cwiseAbs().maxCoeff()) * std::sqrt(static_cast<double>(X.rows()));
    if (!(norm > 1e-12 * scale)) {
      Z.col(j).setZero();
      zero_var[static_cast<std::size_t>(j)] = true;
    } else {
      Z.col(j) /= norm;
    }
  }
  return Z;
}

}  // namespace detail

inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& X) {
  if (X.rows() < 3) throw InputError("correlation_matrix needs n >= 3 rows");
  std::vector<bool> zero_var;
  const Eigen::MatrixXd Z = detail::unit_columns(X, zero_var);
  Eigen::MatrixXd C = Z.transpose() * Z;
  C = C.cwiseMax(-1.0).cwiseMin(1.0);
  C = 0.5 * (C + C.transpose()).eval();
  C.diagonal().setOnes();
  return C;
}

using Groups = std::vector<std::vector<std::size_t>>;

// Connected components of the graph with an edge wherever |corr| > threshold.
// Groups are ordered by their smallest member; members ascend.
inline Groups group_features(const Eigen::MatrixXd& corr, double threshold = 0.8) {
  const auto p = static_cast<std::size_t>(corr.rows());
  std::vector<std::size_t> parent(p);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (std::abs(corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) > threshold) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < p; ++i) by_root[find(i)].push_back(i);
  Groups groups;
  for (auto& [root, members] : by_root) groups.push_back(std::move(members));
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

// Pearson correlation of every column with y; zero-variance columns give 0.
inline std::vector<double> target_correlation(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw ShapeError("target_correlation: row count mismatch");
  std::vector<bool> zero_var;
  const Eigen::MatrixXd Z = detail::unit_columns(X, zero_var);
  Eigen::VectorXd yc = y.array() - y.mean();
  const double yn = yc.norm();
  std::vector<double> r(static_cast<std::size_t>(X.cols()), 0.0);
  if (!(yn > 0.0)) return r;
  yc /= yn;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    r[static_cast<std::size_t>(j)] = zero_var[static_cast<std::size_t>(j)] ? 0.0 : std::clamp(Z.col(j).dot(yc), -1.0, 1.0);
  return r;
}

// One index per group: largest |target correlation|, lowest index on ties.
inline std::vector<std::size_t> select_champions(const Groups& groups, const std::vector<double>& target_corr) {
  std::vector<std::size_t> champions;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    std::size_t best = g.front();
    for (std::size_t i : g)
      if (std::abs(target_corr[i]) > std::abs(target_corr[best]) ||
          (std::abs(target_corr[i]) == std::abs(target_corr[best]) && i < best))
        best = i;
    champions.push_back(best);
  }
  return champions;
}

// ---------------------------------------------------------------------------
// LASSO refinement

struct RefineOptions {
  std::optional<std::size_t> k_max;
  int inner_folds = 3;
  int grid_points = 50;
  double grid_decades = 4.0;
  std::uint64_t seed = 17;
  linreg::LassoOptions lasso;
};

struct RefineResult {
  std::vector<std::size_t> selected;  // column indices into the input, by |weight| desc
  Eigen::VectorXd weights;            // over all input columns (0 for constant ones)
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> cv_mse;
  linreg::Standardizer standardizer;
};

inline std::vector<double> lambda_grid(double lambda_max, int points, double decades) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lambda_max * std::pow(10.0, -decades * i / std::max(1, points - 1));
  return grid;
}

// Warm-started solutions along a decreasing penalty grid.
inline std::vector<Eigen::VectorXd> lasso_path(const Eigen::MatrixXd& Z, const Eigen::VectorXd& yc,
                                               const std::vector<double>& grid, const linreg::LassoOptions& opt = {}) {
  std::vector<Eigen::VectorXd> path;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(Z.cols());
  linreg::LassoOptions o = opt;
  for (double lambda : grid) {
    w = linreg::lasso_fit(Z, yc, lambda, o, &w).weights;
    o.check_input = false;
    path.push_back(w);
  }
  return path;
}

namespace detail {

struct Prepared {
  Eigen::MatrixXd Z;
  Eigen::VectorXd yc;
  std::vector<Eigen::Index> columns;  // non-constant input columns
};

inline Prepared prepare(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const linreg::Standardizer& s) {
  Prepared p;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (!s.constant[static_cast<std::size_t>(j)]) p.columns.push_back(j);
  const Eigen::MatrixXd full = s.apply(X);
  p.Z.resize(X.rows(), static_cast<Eigen::Index>(p.columns.size()));
  for (std::size_t k = 0; k < p.columns.size(); ++k) p.Z.col(static_cast<Eigen::Index>(k)) = full.col(p.columns[k]);
  p.yc = y.array() - y.mean();
  return p;
}

inline Eigen::MatrixXd rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Eigen::VectorXd rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace detail

inline RefineResult lasso_refine(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const RefineOptions& opt = {}) {
  if (X.cols() == 0) throw SelectionError("lasso_refine: no champion features");
  if (X.rows() != y.size()) throw ShapeError("lasso_refine: row count mismatch");
  RefineResult res;
  res.standardizer = linreg::Standardizer::fit(X);
  const auto full = detail::prepare(X, y, res.standardizer);
  res.weights = Eigen::VectorXd::Zero(X.cols());
  if (full.columns.empty()) throw SelectionError("lasso_refine: every champion is constant");
  const double lmax = linreg::lambda_max(full.Z, full.yc);
  if (!(lmax > 0.0)) throw SelectionError("lasso_refine: target is constant or orthogonal to every feature");
  res.grid = lambda_grid(lmax, opt.grid_points, opt.grid_decades);

  // Inner K-fold CV over the grid; every inner fit re-standardizes on its own rows.
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int k = std::max(2, std::min<int>(opt.inner_folds, static_cast<int>(n)));
  res.cv_mse.assign(res.grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (static_cast<int>(i % static_cast<std::size_t>(k)) == f ? test : train).push_back(order[i]);
    const Eigen::MatrixXd Xtr = detail::rows(X, train), Xte = detail::rows(X, test);
    const Eigen::VectorXd ytr = detail::rows(y, train), yte = detail::rows(y, test);
    const auto s = linreg::Standardizer::fit(Xtr);
    const auto prep = detail::prepare(Xtr, ytr, s);
    const double ybar = ytr.mean();
    Eigen::MatrixXd Zte_full = s.apply(Xte);
    Eigen::MatrixXd Zte(Zte_full.rows(), static_cast<Eigen::Index>(prep.columns.size()));
    for (std::size_t c = 0; c < prep.columns.size(); ++c) Zte.col(static_cast<Eigen::Index>(c)) = Zte_full.col(prep.columns[c]);
    linreg::LassoOptions o = opt.lasso;
    o.check_input = false;
    const auto path = lasso_path(prep.Z, prep.yc, res.grid, o);
    for (std::size_t g = 0; g < path.size(); ++g) {
      const Eigen::VectorXd pred = (Zte * path[g]).array() + ybar;
      res.cv_mse[g] += (pred - yte).squaredNorm() / static_cast<double>(n);
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < res.cv_mse.size(); ++g)
    if (res.cv_mse[g] < res.cv_mse[best]) best = g;

  linreg::LassoOptions o = opt.lasso;
  o.check_input = false;
  const auto path = lasso_path(full.Z, full.yc, res.grid, o);
  std::size_t chosen = best;
  if (path[chosen].cwiseAbs().maxCoeff() == 0.0) {
    // CV preferred the empty model; fall back to the largest penalty with support.
    chosen = path.size();
    for (std::size_t g = 0; g < path.size(); ++g)
      if (path[g].cwiseAbs().maxCoeff() > 0.0) {
        chosen = g;
        break;
      }
    if (chosen == path.size()) throw SelectionError("lasso_refine: all-zero solution at every penalty");
  }
  res.lambda = res.grid[chosen];
  for (std::size_t c = 0; c < full.columns.size(); ++c) res.weights(full.columns[c]) = path[chosen](static_cast<Eigen::Index>(c));

  for (Eigen::Index j = 0; j < res.weights.size(); ++j)
    if (res.weights(j) != 0.0) res.selected.push_back(static_cast<std::size_t>(j));
  std::stable_sort(res.selected.begin(), res.selected.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(res.weights(static_cast<Eigen::Index>(a))) > std::abs(res.weights(static_cast<Eigen::Index>(b)));
  });
  if (opt.k_max && res.selected.size() > *opt.k_max) res.selected.resize(*opt.k_max);
  return res;
}

// ---------------------------------------------------------------------------
// Full selector

struct SelectorOptions {
  double threshold = 0.8;
  RefineOptions refine;
};

struct FeatureSelector {
  std::vector<std::string> feature_names;  // all p input names
  double threshold = 0.8;
  std::optional<std::size_t> k_max;
  Groups groups;
  std::vector<std::size_t> champions;
  std::vector<double> lasso_weights;   // aligned with champions
  std::vector<double> champion_mean;   // standardization constants (train rows)
  std::vector<double> champion_scale;
  double lambda = 0.0;
  std::vector<std::size_t> selected;   // indices into feature_names, by |weight| desc
  std::vector<double> selected_weights;

  std::vector<std::string> selected_names() const {
    std::vector<std::string> out;
    for (auto i : selected) out.push_back(feature_names[i]);
    return out;
  }
};

inline FeatureSelector fit_selector(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const std::vector<std::string>& names, const SelectorOptions& opt = {}) {
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw ShapeError("fit_selector: names/columns mismatch");
  FeatureSelector fs;
  fs.feature_names = names;
  fs.threshold = opt.threshold;
  fs.k_max = opt.refine.k_max;
  fs.groups = group_features(correlation_matrix(X), opt.threshold);
  fs.champions = select_champions(fs.groups, target_correlation(X, y));

  Eigen::MatrixXd Xc(X.rows(), static_cast<Eigen::Index>(fs.champions.size()));
  for (std::size_t k = 0; k < fs.champions.size(); ++k) Xc.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(fs.champions[k]));
  const auto refined = lasso_refine(Xc, y, opt.refine);
  fs.lambda = refined.lambda;
  for (std::size_t k = 0; k < fs.champions.size(); ++k) {
    fs.lasso_weights.push_back(refined.weights(static_cast<Eigen::Index>(k)));
    fs.champion_mean.push_back(refined.standardizer.mean(static_cast<Eigen::Index>(k)));
    fs.champion_scale.push_back(refined.standardizer.scale(static_cast<Eigen::Index>(k)));
  }
  for (std::size_t k : refined.selected) {
    fs.selected.push_back(fs.champions[k]);
    fs.selected_weights.push_back(refined.weights(static_cast<Eigen::Index>(k)));
  }
  return fs;
}

inline nlohmann::json to_json(const FeatureSelector& fs) {
  nlohmann::json j;
  j["feature_names"] = fs.feature_names;
  j["threshold"] = fs.threshold;
  j["k_max"] = fs.k_max ? nlohmann::json(*fs.k_max) : nlohmann::json(nullptr);
  j["groups"] = fs.groups;
  j["champions"] = fs.champions;
  j["lasso_weights"] = fs.lasso_weights;
  j["champion_mean"] = fs.champion_mean;
  j["champion_scale"] = fs.champion_scale;
  j["lambda"] = fs.lambda;
  j["selected"] = fs.selected;
  j["selected_names"] = fs.selected_names();
  j["selected_weights"] = fs.selected_weights;
  return j;
}

inline FeatureSelector selector_from_json(const nlohmann::json& j) {
  FeatureSelector fs;
  fs.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  fs.threshold = j.at("threshold").get<double>();
  if (!j.at("k_max").is_null()) fs.k_max = j.at("k_max").get<std::size_t>();
  fs.groups = j.at("groups").get<Groups>();
  fs.champions = j.at("champions").get<std::vector<std::size_t>>();
  fs.lasso_weights = j.at("lasso_weights").get<std::vector<double>>();
  fs.champion_mean = j.at("champion_mean").get<std::vector<double>>();
  fs.champion_scale = j.at("champion_scale").get<std::vector<double>>();
  fs.lambda = j.at("lambda").get<double>();
  fs.selected = j.at("selected").get<std::vector<std::size_t>>();
  fs.selected_weights = j.at("selected_weights").get<std::vector<double>>();
  return fs;
}

// ---------------------------------------------------------------------------
// Importance across cross-validation folds

struct Importance {
  std::string feature;
  std::size_t folds_selected = 0;
  double frequency = 0.0;
  double mean_abs_weight = 0.0;
};

// Ranked by selection frequency, then mean |weight|, then name.
inline std::vector<Importance> feature_importance(const std::vector<FeatureSelector>& selectors) {
  if (selectors.empty()) throw InputError("feature_importance needs at least one fitted selector");
  std::map<std::string, Importance> acc;
  for (const auto& fs : selectors)
    for (std::size_t k = 0; k < fs.selected.size(); ++k) {
      auto& imp = acc[fs.feature_names[fs.selected[k]]];
      imp.feature = fs.feature_names[fs.selected[k]];
      ++imp.folds_selected;
      imp.mean_abs_weight += std::abs(fs.selected_weights[k]);
    }
  std::vector<Importance> out;
  for (auto& [name, imp] : acc) {
    imp.mean_abs_weight /= static_cast<double>(imp.folds_selected);
    imp.frequency = static_cast<double>(imp.folds_selected) / static_cast<double>(selectors.size());
    out.push_back(imp);
  }
  std::sort(out.begin(), out.end(), [](const Importance& a, const Importance& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    if (a.mean_abs_weight != b.mean_abs_weight) return a.mean_abs_weight > b.mean_abs_weight;
    return a.feature < b.feature;
  });
  return out;
}

}  // namespace fatigue::featselect
