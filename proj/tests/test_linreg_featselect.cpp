#include <random>

#include <gtest/gtest.h>

#include "fatigue/featselect.hpp"
#include "fatigue/linreg.hpp"

using namespace fatigue;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < p; ++c) X(r, c) = g(rng);
  return X;
}

// Centred columns with unit population variance, and a centred target.
void standardize(Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  X = linreg::Standardizer::fit(X).apply(X);
  y = y.array() - y.mean();
}

}  // namespace

TEST(Ols, RecoversExactLinearMap) {
  const auto X = gaussian(50, 3, 1);
  const Eigen::Vector3d w(1.0, -2.0, 0.5);
  const Eigen::VectorXd y = (X * w).array() + 2.0;
  const auto m = linreg::fit_ols(X, y);
  EXPECT_TRUE(m.raw_weights().isApprox(w, 1e-10));
  EXPECT_NEAR(m.raw_intercept(), 2.0, 1e-10);
  EXPECT_LT((linreg::predict(m, X) - y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ols, HandExample) {
  Eigen::MatrixXd X(4, 1);
  X << 0, 1, 2, 3;
  Eigen::VectorXd y(4);
  y << 1, 3, 2, 5;
  const auto m = linreg::fit_ols(X, y);
  EXPECT_NEAR(m.raw_weights()(0), 1.1, 1e-12);
  EXPECT_NEAR(m.raw_intercept(), 1.1, 1e-12);
}

TEST(Ols, ConstantColumnGetsZeroWeight) {
  auto X = gaussian(30, 2, 2);
  X.col(1).setConstant(4.2);
  const Eigen::VectorXd y = 3.0 * X.col(0);
  const auto m = linreg::fit_ols(X, y);
  EXPECT_EQ(m.weights(1), 0.0);
  EXPECT_NEAR(m.raw_weights()(0), 3.0, 1e-10);
}

TEST(Ols, ShapeAndSchemaChecks) {
  const auto X = gaussian(10, 2, 3);
  EXPECT_THROW(linreg::fit_ols(X, Eigen::VectorXd::Zero(9)), ShapeError);
  const auto m = linreg::fit_ols(X, Eigen::VectorXd::Ones(10), {"a", "b"});
  EXPECT_THROW(linreg::predict(m, X, {"b", "a"}), SchemaError);
  EXPECT_THROW(linreg::predict(m, gaussian(3, 3, 4)), ShapeError);
  const auto back = linreg::linear_model_from_json(linreg::to_json(m));
  EXPECT_EQ(linreg::predict(back, X), linreg::predict(m, X));
}

TEST(Lasso, SatisfiesKkt) {
  auto X = gaussian(120, 10, 5);
  Eigen::VectorXd y = X.col(0) * 2 - X.col(3) + 0.5 * gaussian(120, 1, 6).col(0);
  standardize(X, y);
  const double n = 120;
  for (double frac : {0.5, 0.1, 0.01}) {
    const double lambda = frac * linreg::lambda_max(X, y);
    linreg::LassoOptions opt;
    opt.tolerance = 1e-12;
    const auto res = linreg::lasso_fit(X, y, lambda, opt);
    ASSERT_TRUE(res.converged);
    const Eigen::VectorXd g = X.transpose() * (y - X * res.weights) / n;
    for (Eigen::Index j = 0; j < 10; ++j) {
      if (res.weights(j) != 0.0) EXPECT_NEAR(g(j), lambda * (res.weights(j) > 0 ? 1 : -1), 1e-8);
      else EXPECT_LE(std::abs(g(j)), lambda + 1e-8);
    }
  }
}

TEST(Lasso, OrthogonalDesignIsSoftThresholding) {
  // Walsh columns: zero mean, unit variance, mutually orthogonal.
  Eigen::MatrixXd X(8, 3);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 3; ++j) X(i, j) = (i >> j) & 1 ? -1.0 : 1.0;
  ASSERT_TRUE((X.transpose() * X / 8).isApprox(Eigen::Matrix3d::Identity()));
  Eigen::VectorXd y(8);
  y << 3, -1, 2, 0.5, -2, 1, 0, -3.5;
  y = y.array() - y.mean();
  const double lambda = 0.3;
  linreg::LassoOptions opt;
  opt.tolerance = 1e-14;
  const auto res = linreg::lasso_fit(X, y, lambda, opt);
  const Eigen::VectorXd z = X.transpose() * y / 8;
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(res.weights(j), linreg::soft_threshold(z(j), lambda), 1e-12);
}

TEST(Lasso, ZeroPenaltyMatchesOls) {
  auto X = gaussian(80, 5, 7);
  Eigen::VectorXd y = gaussian(80, 1, 8).col(0) + X.col(2);
  standardize(X, y);
  linreg::LassoOptions opt;
  opt.tolerance = 1e-13;
  const auto res = linreg::lasso_fit(X, y, 0.0, opt);
  const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
  EXPECT_LT((res.weights - ols).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Lasso, LambdaMaxGivesZeroAndObjectiveDecreases) {
  auto X = gaussian(60, 6, 9);
  Eigen::VectorXd y = X.col(1) - X.col(4);
  standardize(X, y);
  const double lmax = linreg::lambda_max(X, y);
  EXPECT_EQ(linreg::lasso_fit(X, y, lmax).weights.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(linreg::lasso_fit(X, y, 0.99 * lmax).weights.cwiseAbs().maxCoeff(), 0.0);
  linreg::LassoOptions opt;
  opt.track_objective = true;
  const auto res = linreg::lasso_fit(X, y, 0.05 * lmax, opt);
  for (std::size_t k = 1; k < res.objective.size(); ++k) EXPECT_LE(res.objective[k], res.objective[k - 1] * (1 + 1e-12));
}

TEST(Lasso, RejectsUnstandardizedInput) {
  auto X = gaussian(40, 3, 10);
  Eigen::VectorXd y = X.col(0);
  EXPECT_THROW(linreg::lasso_fit((X.array() * 3.0 + 1.0).matrix(), y, 0.1), ContractError);
  standardize(X, y);
  EXPECT_THROW(linreg::lasso_fit(X, (y.array() + 5.0).matrix(), 0.1), ContractError);
  EXPECT_THROW(linreg::lasso_fit(X, y, -1.0), InputError);
}

TEST(Grouping, StrictThresholdAndTransitivity) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(4, 4);
  C(0, 1) = C(1, 0) = 0.9;
  C(1, 2) = C(2, 1) = -0.85;
  C(0, 2) = C(2, 0) = 0.5;
  C(2, 3) = C(3, 2) = 0.8;  // exactly at the threshold: no edge
  const auto g = featselect::group_features(C, 0.8);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(g[1], (std::vector<std::size_t>{3}));
}

TEST(Grouping, CorrelatedColumnsFromData) {
  auto X = gaussian(200, 3, 11);
  X.col(1) = X.col(0) + 0.05 * X.col(1);
  const auto g = featselect::group_features(featselect::correlation_matrix(X));
  EXPECT_EQ(g, (featselect::Groups{{0, 1}, {2}}));
}

TEST(Champions, LargestAbsoluteCorrelationLowestIndexOnTies) {
  EXPECT_EQ(featselect::select_champions({{0, 1, 2}}, {0.5, -0.5, 0.3}), (std::vector<std::size_t>{0}));
  EXPECT_EQ(featselect::select_champions({{1, 2}, {0}}, {0.2, 0.1, -0.7}), (std::vector<std::size_t>{2, 0}));
}

TEST(Selector, RecoversSparseSupport) {
  auto X = gaussian(300, 30, 12);
  const Eigen::VectorXd y = 3 * X.col(0) - 2 * X.col(5) + 1.5 * X.col(12) + 0.5 * gaussian(300, 1, 13).col(0);
  std::vector<std::string> names;
  for (int j = 0; j < 30; ++j) names.push_back("f" + std::to_string(j));
  const auto fs = featselect::fit_selector(X, y, names);
  ASSERT_GE(fs.selected.size(), 3u);
  std::vector<std::size_t> top(fs.selected.begin(), fs.selected.begin() + 3);
  EXPECT_EQ(top, (std::vector<std::size_t>{0, 5, 12}));
  EXPECT_EQ(fs.champions.size(), 30u);

  featselect::SelectorOptions opt;
  opt.refine.k_max = 2;
  const auto capped = featselect::fit_selector(X, y, names, opt);
  EXPECT_EQ(capped.selected_names(), (std::vector<std::string>{"f0", "f5"}));

  const auto back = featselect::selector_from_json(featselect::to_json(capped));
  EXPECT_EQ(back.selected, capped.selected);
  EXPECT_EQ(back.k_max, capped.k_max);
  EXPECT_EQ(back.groups, capped.groups);
}

TEST(Selector, Deterministic) {
  auto X = gaussian(90, 12, 14);
  const Eigen::VectorXd y = X.col(3) + 0.3 * gaussian(90, 1, 15).col(0);
  std::vector<std::string> names(12);
  for (int j = 0; j < 12; ++j) names[static_cast<std::size_t>(j)] = "c" + std::to_string(j);
  const auto a = featselect::to_json(featselect::fit_selector(X, y, names));
  const auto b = featselect::to_json(featselect::fit_selector(X, y, names));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Selector, ConstantTargetFails) {
  const auto X = gaussian(40, 4, 16);
  EXPECT_THROW(featselect::fit_selector(X, Eigen::VectorXd::Constant(40, 2.0), {"a", "b", "c", "d"}), SelectionError);
}

TEST(Importance, RankedByFrequencyThenWeightThenName) {
  auto make = [](std::vector<std::size_t> sel, std::vector<double> w) {
    featselect::FeatureSelector fs;
    fs.feature_names = {"a", "b", "c", "d"};
    fs.selected = std::move(sel);
    fs.selected_weights = std::move(w);
    return fs;
  };
  const auto imp = featselect::feature_importance({make({0, 1}, {0.5, -2.0}), make({1, 2}, {1.0, 0.1}),
                                                   make({3, 2}, {0.3, -0.1})});
  ASSERT_EQ(imp.size(), 4u);
  EXPECT_EQ(imp[0].feature, "b");
  EXPECT_NEAR(imp[0].mean_abs_weight, 1.5, 1e-12);
  EXPECT_EQ(imp[1].feature, "c");
  EXPECT_NEAR(imp[1].frequency, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(imp[2].feature, "a");
  EXPECT_EQ(imp[3].feature, "d");
  EXPECT_THROW(featselect::feature_importance({}), InputError);
}
