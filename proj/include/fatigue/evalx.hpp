#pragma once

// Cross-validation harness: splitters, metrics, per-fold pipeline fitting on
// training rows only, and the report written by `fatigue train-eval`.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fatigue/common.hpp"
#include "fatigue/featselect.hpp"
#include "fatigue/fusion.hpp"
#include "fatigue/highfeat.hpp"
#include "fatigue/linreg.hpp"
#include "fatigue/seqnet.hpp"
#include "fatigue/stats.hpp"

namespace fatigue::evalx {

// ---------------------------------------------------------------------------
// Metrics

namespace detail {
inline void check_lengths(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size() || y.empty()) throw InputError("metric inputs must be non-empty and equal length");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_lengths(y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_lengths(y, y_hat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

inline double pearson(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_lengths(y, y_hat);
  return stats::pearson(y, y_hat);
}

// ---------------------------------------------------------------------------
// Splitters

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::string label;  // subject id for LOSO folds
};

// Seeded shuffle, then contiguous folds whose sizes differ by at most one
// (the first n % k folds get the extra element). Index lists are sorted.
inline std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InputError("kfold_split: k must be >= 2");
  if (n < k) throw InputError("kfold_split: fewer samples than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].test.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + size));
    pos += size;
    folds[f].label = "fold" + std::to_string(f);
  }
  for (auto& f : folds) {
    std::sort(f.test.begin(), f.test.end());
    std::vector<bool> in_test(n, false);
    for (auto i : f.test) in_test[i] = true;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_test[i]) f.train.push_back(i);
  }
  return folds;
}

struct LosoSplit {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

// One fold per subject that has at least one sequence, ordered by subject id.
inline LosoSplit loso_split(const fusion::Dataset& ds) {
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (const auto& s : ds.subjects) by_subject[s];
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_subject[ds.samples[i].key.subject_id].push_back(i);
  LosoSplit out;
  std::vector<std::string> usable;
  for (const auto& [subject, idx] : by_subject) {
    if (idx.empty()) out.warnings.push_back("subject " + subject + " has no sequences; excluded from LOSO");
    else usable.push_back(subject);
  }
  if (usable.size() < 2) throw InputError("loso_split: need at least 2 subjects with sequences");
  for (const auto& subject : usable) {
    Fold f;
    f.label = subject;
    f.test = by_subject[subject];
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
      if (ds.samples[i].key.subject_id != subject) f.train.push_back(i);
    out.folds.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines

enum class PipelineKind { mean_baseline, linear, linear_fs, lstm, lstm_sa, lstm_csa };

inline std::string_view pipeline_name(PipelineKind k) {
  switch (k) {
    case PipelineKind::mean_baseline: return "mean";
    case PipelineKind::linear: return "linear";
    case PipelineKind::linear_fs: return "linear-fs";
    case PipelineKind::lstm: return "lstm";
    case PipelineKind::lstm_sa: return "lstm-sa";
    case PipelineKind::lstm_csa: return "lstm-csa";
  }
  return "?";
}

inline std::optional<PipelineKind> parse_pipeline(std::string_view s) {
  for (auto k : {PipelineKind::mean_baseline, PipelineKind::linear, PipelineKind::linear_fs, PipelineKind::lstm,
                 PipelineKind::lstm_sa, PipelineKind::lstm_csa})
    if (pipeline_name(k) == s) return k;
  return std::nullopt;
}

inline bool is_sequence(PipelineKind k) {
  return k == PipelineKind::lstm || k == PipelineKind::lstm_sa || k == PipelineKind::lstm_csa;
}

struct PipelineSpec {
  PipelineKind kind = PipelineKind::linear_fs;
  featselect::SelectorOptions selector;
  seqnet::TrainConfig train;
};

// Everything fitted on a fold's training rows.
struct FoldArtifacts {
  std::vector<double> impute_median;  // per window-level feature
  double train_mean = 0.0;
  std::optional<featselect::FeatureSelector> selector;
  std::optional<linreg::LinearModel> linear;
  std::vector<std::size_t> linear_columns;  // high-level columns fed to the linear model
  std::optional<seqnet::SeqModel> seq;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["impute_median"] = impute_median;
    j["train_mean"] = train_mean;
    if (selector) j["selector"] = featselect::to_json(*selector);
    if (linear) j["linear"] = linreg::to_json(*linear);
    j["linear_columns"] = linear_columns;
    if (seq) j["seq"] = seqnet::to_json(*seq);
    return j;
  }

  std::string hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
    return buf;
  }
};

// Feature-wise medians over every window of the given samples, ignoring
// missing values; all-missing features impute to 0.
inline std::vector<double> fit_imputation(const fusion::Dataset& ds, std::span<const std::size_t> rows) {
  const auto d = ds.feature_names.size();
  std::vector<double> med(d, 0.0);
  std::vector<double> col;
  for (std::size_t c = 0; c < d; ++c) {
    col.clear();
    for (auto i : rows) {
      const auto& X = ds.samples[i].X;
      for (Eigen::Index r = 0; r < X.rows(); ++r)
        if (!is_missing(X(r, static_cast<Eigen::Index>(c)))) col.push_back(X(r, static_cast<Eigen::Index>(c)));
    }
    if (!col.empty()) med[c] = stats::median(col);
  }
  return med;
}

inline Eigen::MatrixXd impute(const Eigen::MatrixXd& X, const std::vector<double>& med) {
  Eigen::MatrixXd out = X;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      if (is_missing(out(r, c))) out(r, c) = med[static_cast<std::size_t>(c)];
  return out;
}

inline Eigen::MatrixXd high_level_matrix(const fusion::Dataset& ds, std::span<const std::size_t> rows,
                                         const std::vector<double>& med) {
  const auto width = static_cast<Eigen::Index>(ds.feature_names.size() * highfeat::kStatCount);
  Eigen::MatrixXd H(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto v = highfeat::descriptive_stats(impute(ds.samples[rows[r]].X, med));
    H.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), width);
  }
  return H;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

inline seqnet::Variant variant_of(PipelineKind k) {
  switch (k) {
    case PipelineKind::lstm: return seqnet::Variant::lstm;
    case PipelineKind::lstm_sa: return seqnet::Variant::lstm_sa;
    default: return seqnet::Variant::lstm_csa;
  }
}

inline FoldArtifacts fit_fold(const fusion::Dataset& ds, std::span<const std::size_t> train, const PipelineSpec& spec,
                              std::uint64_t seed) {
  if (train.empty()) throw InputError("fold has no training rows");
  FoldArtifacts a;
  a.impute_median = fit_imputation(ds, train);
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t r = 0; r < train.size(); ++r) y(static_cast<Eigen::Index>(r)) = ds.samples[train[r]].y;
  a.train_mean = y.mean();

  switch (spec.kind) {
    case PipelineKind::mean_baseline:
      break;
    case PipelineKind::linear:
    case PipelineKind::linear_fs: {
      const Eigen::MatrixXd H = high_level_matrix(ds, train, a.impute_median);
      const auto names = highfeat::high_level_names(ds.feature_names);
      if (spec.kind == PipelineKind::linear_fs) {
        auto opt = spec.selector;
        opt.refine.seed = derive_seed(seed, 7);
        a.selector = featselect::fit_selector(H, y, names, opt);
        a.linear_columns = a.selector->selected;
      } else {
        a.linear_columns.resize(names.size());
        std::iota(a.linear_columns.begin(), a.linear_columns.end(), 0);
      }
      std::vector<std::string> cols;
      for (auto c : a.linear_columns) cols.push_back(names[c]);
      a.linear = linreg::fit_ols(select_columns(H, a.linear_columns), y, cols);
      break;
    }
    case PipelineKind::lstm:
    case PipelineKind::lstm_sa:
    case PipelineKind::lstm_csa: {
      std::vector<Eigen::MatrixXd> xs;
      xs.reserve(train.size());
      for (auto i : train) xs.push_back(impute(ds.samples[i].X, a.impute_median));
      std::vector<seqnet::Sample> samples;
      for (std::size_t r = 0; r < train.size(); ++r) samples.push_back({&xs[r], ds.samples[train[r]].y});
      auto cfg = spec.train;
      cfg.variant = variant_of(spec.kind);
      cfg.seed = derive_seed(seed, 11);
      a.seq = seqnet::train(samples, cfg).model;
      break;
    }
  }
  return a;
}

inline std::vector<double> predict_fold(const FoldArtifacts& a, const fusion::Dataset& ds,
                                        std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  if (a.linear) {
    const Eigen::MatrixXd H = select_columns(high_level_matrix(ds, rows, a.impute_median), a.linear_columns);
    const Eigen::VectorXd p = linreg::predict(*a.linear, H);
    out.assign(p.data(), p.data() + p.size());
  } else if (a.seq) {
    for (auto i : rows) out.push_back(seqnet::predict_seq(*a.seq, impute(ds.samples[i].X, a.impute_median)).y_hat);
  } else {
    out.assign(rows.size(), a.train_mean);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct FoldResult {
  std::size_t index = 0;
  std::string label;
  std::size_t n_train = 0, n_test = 0;
  bool ok = false;
  std::string error;
  double mae = kMissing, rmse = kMissing;
  std::vector<std::string> selected_features;
  std::string artifact_hash;
  std::optional<featselect::FeatureSelector> selector;
};

struct PooledPrediction {
  std::size_t sample = 0;
  SegmentKey key;
  double y = 0.0;
  double y_hat_raw = 0.0;
  double y_hat_clipped = 0.0;
  std::size_t fold = 0;
};

struct CvReport {
  std::string pipeline;
  std::string splitter;
  std::string modality;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  std::vector<PooledPrediction> pooled;
  double mae_mean = kMissing, mae_std = kMissing, rmse_mean = kMissing, rmse_std = kMissing;
  double pearson_r = kMissing;  // pooled raw predictions
  bool partial = false;
  std::vector<featselect::Importance> importance;
};

// Fits every fold on its training rows only; folds run on up to `jobs`
// threads. A failing fold is recorded and the report marked partial.
inline CvReport run_cv(const fusion::Dataset& ds, const PipelineSpec& spec, const std::vector<Fold>& folds,
                       const std::string& splitter, std::uint64_t seed, int jobs = 1) {
  CvReport rep;
  rep.pipeline = std::string(pipeline_name(spec.kind));
  rep.splitter = splitter;
  rep.modality = std::string(fusion::modality_name(ds.modality));
  rep.seed = seed;
  rep.folds.resize(folds.size());
  std::vector<std::vector<double>> preds(folds.size());

  auto run_one = [&](std::size_t f) {
    auto& fr = rep.folds[f];
    fr.index = f;
    fr.label = folds[f].label;
    fr.n_train = folds[f].train.size();
    fr.n_test = folds[f].test.size();
    try {
      const auto art = fit_fold(ds, folds[f].train, spec, derive_seed(seed, f));
      preds[f] = predict_fold(art, ds, folds[f].test);
      fr.artifact_hash = art.hash();
      if (art.selector) {
        fr.selected_features = art.selector->selected_names();
        fr.selector = art.selector;
      }
      std::vector<double> y, yc;
      for (std::size_t r = 0; r < folds[f].test.size(); ++r) {
        y.push_back(ds.samples[folds[f].test[r]].y);
        yc.push_back(clip_score(preds[f][r]));
      }
      fr.mae = mae(y, yc);
      fr.rmse = rmse(y, yc);
      fr.ok = true;
    } catch (const std::exception& e) {
      fr.ok = false;
      fr.error = e.what();
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, folds.size()))));
  if (workers == 1) {
    for (std::size_t f = 0; f < folds.size(); ++f) run_one(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t f; (f = next++) < folds.size();) run_one(f);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<double> maes, rmses, ys, raws;
  std::vector<featselect::FeatureSelector> selectors;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fr = rep.folds[f];
    if (!fr.ok) {
      rep.partial = true;
      continue;
    }
    maes.push_back(fr.mae);
    rmses.push_back(fr.rmse);
    if (fr.selector) selectors.push_back(*fr.selector);
    for (std::size_t r = 0; r < folds[f].test.size(); ++r) {
      const auto i = folds[f].test[r];
      rep.pooled.push_back({i, ds.samples[i].key, ds.samples[i].y, preds[f][r], clip_score(preds[f][r]), f});
      ys.push_back(ds.samples[i].y);
      raws.push_back(preds[f][r]);
    }
  }
  std::sort(rep.pooled.begin(), rep.pooled.end(), [](const auto& a, const auto& b) { return a.sample < b.sample; });
  if (!maes.empty()) {
    rep.mae_mean = stats::mean(maes);
    rep.mae_std = std::sqrt(stats::variance(maes));
    rep.rmse_mean = stats::mean(rmses);
    rep.rmse_std = std::sqrt(stats::variance(rmses));
  }
  if (ys.size() >= 2) rep.pearson_r = stats::pearson(ys, raws);
  if (!selectors.empty()) rep.importance = featselect::feature_importance(selectors);
  return rep;
}

namespace detail {
inline nlohmann::json num(double v) { return is_missing(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
}  // namespace detail

inline nlohmann::json to_json(const CvReport& r) {
  nlohmann::json j;
  j["format"] = "fatigue-cv-report";
  j["version"] = 1;
  j["pipeline"] = r.pipeline;
  j["splitter"] = r.splitter;
  j["modality"] = r.modality;
  j["seed"] = r.seed;
  j["partial"] = r.partial;
  j["aggregate"] = {{"mae_mean", detail::num(r.mae_mean)},
                    {"mae_std", detail::num(r.mae_std)},
                    {"rmse_mean", detail::num(r.rmse_mean)},
                    {"rmse_std", detail::num(r.rmse_std)},
                    {"pearson_r", detail::num(r.pearson_r)}};
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds)
    j["folds"].push_back({{"index", f.index},
                          {"label", f.label},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"status", f.ok ? "ok" : "failed"},
                          {"error", f.error},
                          {"mae", detail::num(f.mae)},
                          {"rmse", detail::num(f.rmse)},
                          {"selected_features", f.selected_features},
                          {"artifact_hash", f.artifact_hash}});
  j["predictions"] = nlohmann::json::array();
  for (const auto& p : r.pooled)
    j["predictions"].push_back({{"sample", p.key.str()},
                                {"subject_id", p.key.subject_id},
                                {"date", format_date(p.key.date)},
                                {"period", period_name(p.key.period)},
                                {"y", p.y},
                                {"y_hat_raw", p.y_hat_raw},
                                {"y_hat_clipped", p.y_hat_clipped},
                                {"fold", p.fold}});
  j["importance"] = nlohmann::json::array();
  for (const auto& i : r.importance)
    j["importance"].push_back({{"feature", i.feature},
                               {"folds_selected", i.folds_selected},
                               {"frequency", i.frequency},
                               {"mean_abs_weight", i.mean_abs_weight}});
  return j;
}

// report.json, scatter.csv and importance.csv under `dir`.
inline void write_report(const CvReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = fatigue::detail::open_output((dir / "report.json").string());
    out << to_json(r).dump(2) << '\n';
  }
  {
    auto out = fatigue::detail::open_output((dir / "scatter.csv").string());
    out << "sample,y,y_hat_raw,y_hat_clipped,fold\n";
    for (const auto& p : r.pooled)
      out << p.key.str() << ',' << format_double(p.y) << ',' << format_double(p.y_hat_raw) << ','
          << format_double(p.y_hat_clipped) << ',' << p.fold << '\n';
  }
  {
    auto out = fatigue::detail::open_output((dir / "importance.csv").string());
    out << "feature,folds_selected,frequency,mean_abs_weight\n";
    for (const auto& i : r.importance)
      out << i.feature << ',' << i.folds_selected << ',' << format_double(i.frequency) << ','
          << format_double(i.mean_abs_weight) << '\n';
  }
}

}  // namespace fatigue::evalx
