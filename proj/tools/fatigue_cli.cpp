// fatigue: synth | preprocess | train-eval | grad-check | report
//
// Configuration is a JSON object of flat dotted keys (see README). Dedicated
// flags and `--set key=value` override the file. Every run writes
// run_manifest.json with the fully resolved configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fatigue/evalx.hpp"
#include "fatigue/pipeline.hpp"
#include "fatigue/seqnet.hpp"
#include "fatigue/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fatigue;

namespace {

constexpr const char* kToolVersion = "1.0.0";

enum Exit { kOk = 0, kConfig = 2, kData = 3, kTraining = 4 };

// ---------------------------------------------------------------------------
// Configuration

using Registry = std::map<std::string, json>;  // key -> default (null: unset)

Registry common_keys() { return {{"seed", nullptr}, {"jobs", 1}, {"out", nullptr}}; }

Registry synth_keys() {
  auto r = common_keys();
  r.insert({{"synth.n_subjects", 9},          {"synth.days", 7},
            {"synth.rule", "linear_hr"},      {"synth.noise_std", 0.5},
            {"synth.start_date", "2020-01-06"}, {"synth.sample_rate_hz", 100},
            {"synth.ecg_minutes", 120.0},     {"synth.ecg_noise_mv", 0.02},
            {"synth.hr_min_bpm", 60.0},       {"synth.hr_max_bpm", 110.0},
            {"synth.activity_min", 20.0},     {"synth.activity_max", 300.0},
            {"synth.with_ecg", true},         {"synth.with_counts", true},
            {"ingest.tz_offset_min", 0}});
  return r;
}

Registry preprocess_keys() {
  auto r = common_keys();
  r.insert({{"paths.ecg_dir", nullptr},
            {"paths.counts_dir", nullptr},
            {"paths.labels", nullptr},
            {"modality", "both"},
            {"ingest.tz_offset_min", 0},
            {"ecg.band_low_hz", 5.0},
            {"ecg.band_high_hz", 15.0},
            {"ecg.integration_ms", 150.0},
            {"ecg.refractory_ms", 200.0},
            {"ecg.min_interval_ms", 300.0},
            {"ecg.max_interval_ms", 2000.0},
            {"ecg.max_relative_jump", 0.2},
            {"ecg.min_coverage_s", 240.0},
            {"ecg.max_corrected_fraction", 0.2},
            {"ecg.min_nni_count", 100},
            {"hrv.resample_hz", 4.0},
            {"hrv.segment_len", 256},
            {"acti.nonwear_min_minutes", 60.0},
            {"acti.nonwear_max_interrupt_minutes", 2.0},
            {"acti.nonwear_interrupt_max_cpm", 100.0},
            {"fusion.min_windows", 20}});
  return r;
}

Registry train_eval_keys() {
  auto r = common_keys();
  r.insert({{"paths.dataset", nullptr},
            {"pipeline", "linear-fs"},
            {"splitter", "kfold"},
            {"cv.folds", 5},
            {"featselect.threshold", 0.8},
            {"featselect.k_max", nullptr},
            {"featselect.inner_folds", 3},
            {"featselect.grid_points", 50},
            {"featselect.grid_decades", 4.0},
            {"seqnet.hidden", 128},
            {"seqnet.attn_dim", 128},
            {"seqnet.lambda_csa", 0.1},
            {"seqnet.lr", 1e-3},
            {"seqnet.epochs", 100},
            {"seqnet.patience", 10},
            {"seqnet.clip_norm", 5.0},
            {"seqnet.val_fraction", 0.1}});
  return r;
}

Registry grad_check_keys() {
  auto r = common_keys();
  r.insert({{"seqnet.variant", "all"},
            {"seqnet.lambda_csa", 0.7},
            {"gradcheck.input_dim", 3},
            {"gradcheck.hidden", 4},
            {"gradcheck.attn_dim", 4},
            {"gradcheck.length", 5},
            {"gradcheck.eps", 1e-5},
            {"gradcheck.init_scale", 1.0},
            {"gradcheck.target_offset", 0.5},
            {"gradcheck.tolerance", 1e-5},
            {"gradcheck.tolerance_csa", 1e-4}});
  return r;
}

Registry report_keys() { return {{"paths.report", nullptr}}; }

bool is_subject_tz_key(const std::string& k) {
  static const std::string prefix = "ingest.tz_offset_min.";
  return k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0;
}

class Config {
 public:
  explicit Config(Registry reg) : values_(std::move(reg)) {}

  void set(const std::string& key, json v) {
    if (!values_.count(key) && !(is_subject_tz_key(key) && values_.count("ingest.tz_offset_min")))
      throw ConfigError("unknown config key '" + key + "'");
    values_[key] = std::move(v);
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object of dotted keys");
    for (auto& [k, v] : j.items()) set(k, v);
  }

  // `--set key=value`; the value is parsed as JSON when possible.
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    json v = json::parse(raw, nullptr, false);
    if (v.is_discarded()) v = raw;
    set(key, v);
  }

  bool has(const std::string& key) const {
    const auto it = values_.find(key);
    return it != values_.end() && !it->second.is_null();
  }

  template <class T>
  T get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end() || it->second.is_null()) throw ConfigError("missing required config key '" + key + "'");
    try {
      return it->second.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + it->second.dump());
    }
  }

  std::string path(const std::string& key) const { return get<std::string>(key); }

  const Registry& values() const { return values_; }

 private:
  Registry values_;
};

void write_manifest(const Config& cfg, const std::string& command, const fs::path& dir) {
  json j;
  j["command"] = command;
  j["tool_version"] = kToolVersion;
  j["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"dataset_format", 1},
                   {"report_format", 1}};
  json c = json::object();
  for (const auto& [k, v] : cfg.values()) c[k] = v;
  j["config"] = c;
  j["seed"] = cfg.values().at("seed");
  fs::create_directories(dir);
  std::ofstream out(dir / "run_manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write run manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

std::uint64_t seed_of(const Config& c) {
  const auto it = c.values().find("seed");
  if (it == c.values().end() || it->second.is_null()) throw ConfigError("a seed is mandatory (--seed or \"seed\")");
  if (!it->second.is_number_integer() && !it->second.is_number_unsigned())
    throw ConfigError("seed must be a non-negative integer");
  return it->second.get<std::uint64_t>();
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(const Config& c) {
  synth::SynthCohortSpec spec;
  spec.seed = seed_of(c);
  spec.n_subjects = c.get<int>("synth.n_subjects");
  spec.days = c.get<int>("synth.days");
  const auto rule = synth::parse_rule(c.get<std::string>("synth.rule"));
  if (!rule) throw ConfigError("synth.rule must be linear_hr, linear_activity or mixed");
  spec.label_rule = *rule;
  spec.noise_std = c.get<double>("synth.noise_std");
  const auto date = parse_date(c.get<std::string>("synth.start_date"));
  if (!date) throw ConfigError("synth.start_date must be YYYY-MM-DD");
  spec.start_date = *date;
  spec.sample_rate_hz = c.get<int>("synth.sample_rate_hz");
  spec.ecg_minutes_per_period = c.get<double>("synth.ecg_minutes");
  spec.ecg_noise_std_mv = c.get<double>("synth.ecg_noise_mv");
  spec.hr_min_bpm = c.get<double>("synth.hr_min_bpm");
  spec.hr_max_bpm = c.get<double>("synth.hr_max_bpm");
  spec.activity_min = c.get<double>("synth.activity_min");
  spec.activity_max = c.get<double>("synth.activity_max");
  spec.tz_offset_min = c.get<int>("ingest.tz_offset_min");
  spec.use_default_coefficients();

  const fs::path out = c.path("out");
  const auto plan = synth::plan_cohort(spec);
  const auto files = synth::write_cohort(plan, out, c.get<bool>("synth.with_ecg"), c.get<bool>("synth.with_counts"));
  write_manifest(c, "synth", out);
  std::cout << "wrote " << files.ecg_files << " ECG files, " << files.counts_files << " counts files, "
            << files.labels << " labels to " << out.string() << '\n';
  return kOk;
}

int cmd_preprocess(const Config& c) {
  seed_of(c);
  pipeline::PreprocessConfig pc;
  const auto modality = fusion::parse_modality(c.get<std::string>("modality"));
  if (!modality) throw ConfigError("modality must be acti, ecg or both");
  pc.modality = *modality;
  pc.jobs = c.get<int>("jobs");
  pc.tz_offset_min = c.get<int>("ingest.tz_offset_min");
  for (const auto& [k, v] : c.values())
    if (is_subject_tz_key(k)) pc.tz_by_subject[k.substr(std::string("ingest.tz_offset_min.").size())] = c.get<int>(k);
  pc.ecg.peaks.band_low_hz = c.get<double>("ecg.band_low_hz");
  pc.ecg.peaks.band_high_hz = c.get<double>("ecg.band_high_hz");
  pc.ecg.peaks.integration_ms = c.get<double>("ecg.integration_ms");
  pc.ecg.peaks.refractory_ms = c.get<double>("ecg.refractory_ms");
  pc.ecg.cleaning.min_interval_ms = c.get<double>("ecg.min_interval_ms");
  pc.ecg.cleaning.max_interval_ms = c.get<double>("ecg.max_interval_ms");
  pc.ecg.cleaning.max_relative_jump = c.get<double>("ecg.max_relative_jump");
  pc.ecg.quality.min_coverage_s = c.get<double>("ecg.min_coverage_s");
  pc.ecg.quality.max_corrected_fraction = c.get<double>("ecg.max_corrected_fraction");
  pc.ecg.quality.min_nni_count = c.get<std::size_t>("ecg.min_nni_count");
  pc.freq.resample_hz = c.get<double>("hrv.resample_hz");
  pc.freq.segment_len = c.get<std::size_t>("hrv.segment_len");
  pc.nonwear.min_run_minutes = c.get<double>("acti.nonwear_min_minutes");
  pc.nonwear.max_interrupt_minutes = c.get<double>("acti.nonwear_max_interrupt_minutes");
  pc.nonwear.interrupt_max_cpm = c.get<double>("acti.nonwear_interrupt_max_cpm");
  pc.fusion.min_windows = c.get<std::size_t>("fusion.min_windows");

  pipeline::Inputs in;
  if (fusion::uses_ecg(pc.modality)) in.ecg_files = pipeline::csv_files(c.path("paths.ecg_dir"));
  if (fusion::uses_acti(pc.modality)) in.counts_files = pipeline::csv_files(c.path("paths.counts_dir"));
  in.labels = read_labels_csv(c.path("paths.labels"));

  const auto result = pipeline::preprocess(in, pc);
  if (result.dataset.samples.empty()) throw EmptyDatasetError("no segment produced a valid sequence");

  const fs::path out = c.path("out");
  fusion::write_dataset(result.dataset, out);
  const auto& d = result.drops;
  json prov;
  prov["modality"] = std::string(fusion::modality_name(pc.modality));
  prov["inputs"] = {{"ecg_files", in.ecg_files.size()}, {"counts_files", in.counts_files.size()}, {"labels", in.labels.size()}};
  prov["segments"] = {{"seen", d.segments_seen},
                      {"kept", d.segments_kept},
                      {"dropped_no_label", d.segments_no_label},
                      {"dropped_too_few_windows", d.segments_too_short}};
  prov["windows"] = {{"on_grid_with_data", d.grid_windows},
                     {"kept", d.windows_kept},
                     {"dropped_ecg_invalid", d.windows_ecg_invalid},
                     {"dropped_ecg_absent", d.windows_ecg_absent},
                     {"dropped_acti_nonwear", d.windows_acti_nonwear},
                     {"dropped_acti_absent", d.windows_acti_absent}};
  {
    std::ofstream p(out / "provenance.json", std::ios::binary);
    p << prov.dump(2) << '\n';
  }
  write_manifest(c, "preprocess", out);
  std::cout << "kept " << d.segments_kept << "/" << d.segments_seen << " segments, " << d.windows_kept
            << " windows -> " << out.string() << '\n';
  return kOk;
}

int cmd_train_eval(const Config& c) {
  const auto seed = seed_of(c);
  const auto kind = evalx::parse_pipeline(c.get<std::string>("pipeline"));
  if (!kind) throw ConfigError("pipeline must be one of mean, linear, linear-fs, lstm, lstm-sa, lstm-csa");
  evalx::PipelineSpec spec;
  spec.kind = *kind;
  spec.selector.threshold = c.get<double>("featselect.threshold");
  if (c.has("featselect.k_max")) {
    const int k = c.get<int>("featselect.k_max");
    if (k < 1) throw ConfigError("featselect.k_max must be >= 1");
    spec.selector.refine.k_max = static_cast<std::size_t>(k);
  }
  spec.selector.refine.inner_folds = c.get<int>("featselect.inner_folds");
  spec.selector.refine.grid_points = c.get<int>("featselect.grid_points");
  spec.selector.refine.grid_decades = c.get<double>("featselect.grid_decades");
  spec.train.hidden = c.get<int>("seqnet.hidden");
  spec.train.attn_dim = c.get<int>("seqnet.attn_dim");
  spec.train.lambda_csa = c.get<double>("seqnet.lambda_csa");
  spec.train.lr = c.get<double>("seqnet.lr");
  spec.train.epochs = c.get<int>("seqnet.epochs");
  spec.train.patience = c.get<int>("seqnet.patience");
  spec.train.clip_norm = c.get<double>("seqnet.clip_norm");
  spec.train.val_fraction = c.get<double>("seqnet.val_fraction");

  const auto ds = fusion::read_dataset(c.path("paths.dataset"));
  if (ds.samples.empty()) throw EmptyDatasetError("dataset has no samples");

  const auto splitter = c.get<std::string>("splitter");
  std::vector<evalx::Fold> folds;
  if (splitter == "kfold") {
    folds = evalx::kfold_split(ds.samples.size(), static_cast<std::size_t>(c.get<int>("cv.folds")), derive_seed(seed, 1));
  } else if (splitter == "loso") {
    auto split = evalx::loso_split(ds);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << '\n';
    folds = std::move(split.folds);
  } else {
    throw ConfigError("splitter must be kfold or loso");
  }

  const auto report = evalx::run_cv(ds, spec, folds, splitter, seed, c.get<int>("jobs"));
  const fs::path out = c.path("out");
  evalx::write_report(report, out);
  write_manifest(c, "train-eval", out);

  std::size_t failed = 0;
  for (const auto& f : report.folds)
    if (!f.ok) {
      ++failed;
      std::cerr << "fold " << f.index << " (" << f.label << ") failed: " << f.error << '\n';
    }
  if (failed == report.folds.size()) return kTraining;
  std::printf("%s %s: MAE %.3f +/- %.3f, RMSE %.3f +/- %.3f, r = %s%s\n", report.pipeline.c_str(), splitter.c_str(),
              report.mae_mean, report.mae_std, report.rmse_mean, report.rmse_std,
              format_double(report.pearson_r).c_str(), report.partial ? " (partial)" : "");
  return kOk;
}

int cmd_grad_check(const Config& c) {
  const auto seed = seed_of(c);
  const int d = c.get<int>("gradcheck.input_dim"), h = c.get<int>("gradcheck.hidden"),
            a = c.get<int>("gradcheck.attn_dim"), t = c.get<int>("gradcheck.length");
  if (d < 1 || h < 1 || a < 1 || t < 1) throw ConfigError("grad-check dimensions must be positive");
  const auto which = c.get<std::string>("seqnet.variant");
  std::vector<seqnet::Variant> variants;
  if (which == "all") variants = {seqnet::Variant::lstm, seqnet::Variant::lstm_sa, seqnet::Variant::lstm_csa};
  else if (auto v = seqnet::parse_variant(which)) variants = {*v};
  else throw ConfigError("seqnet.variant must be lstm, lstm_sa, lstm_csa or all");

  std::mt19937_64 rng(derive_seed(seed, 2));
  std::normal_distribution<double> n01;
  Eigen::MatrixXd X(t, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = n01(rng);

  bool ok = true;
  json out = json::object();
  for (auto v : variants) {
    auto m = seqnet::make_model(v, d, h, a, c.get<double>("seqnet.lambda_csa"));
    m.input_mean = Eigen::VectorXd::Zero(d);
    m.input_scale = Eigen::VectorXd::Ones(d);
    seqnet::init_params(m, derive_seed(seed, 3), c.get<double>("gradcheck.init_scale"));
    // A target near the prediction keeps the loss, and with it the
    // finite-difference roundoff, small.
    const double y = seqnet::predict_seq(m, X).y_hat + c.get<double>("gradcheck.target_offset");
    const double err = seqnet::grad_check(m, X, y, c.get<double>("gradcheck.eps"));
    const double tol = c.get<double>(v == seqnet::Variant::lstm_csa ? "gradcheck.tolerance_csa" : "gradcheck.tolerance");
    ok = ok && err < tol;
    out[std::string(seqnet::variant_name(v))] = {{"max_relative_error", err}, {"tolerance", tol}, {"pass", err < tol}};
    std::printf("%-9s max relative error %.3e (tol %.0e) %s\n", std::string(seqnet::variant_name(v)).c_str(), err, tol,
                err < tol ? "PASS" : "FAIL");
  }
  if (c.has("out")) {
    const fs::path dir = c.path("out");
    fs::create_directories(dir);
    std::ofstream f(dir / "grad_check.json", std::ios::binary);
    f << out.dump(2) << '\n';
    write_manifest(c, "grad-check", dir);
  }
  return ok ? kOk : kTraining;
}

int cmd_report(const Config& c) {
  fs::path p = c.path("paths.report");
  if (fs::is_directory(p)) p /= "report.json";
  std::ifstream in(p);
  if (!in) throw DataError("cannot open report " + p.string());
  json r;
  try {
    r = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what());
  }
  if (r.value("format", "") != "fatigue-cv-report") throw SchemaError("not a fatigue CV report: " + p.string());
  auto num = [](const json& v) { return v.is_null() ? std::string("NA") : format_double(v.get<double>()); };
  const auto& agg = r.at("aggregate");
  std::cout << "pipeline  " << r.at("pipeline").get<std::string>() << "  (" << r.at("modality").get<std::string>()
            << ", " << r.at("splitter").get<std::string>() << ", seed " << r.at("seed") << ")\n";
  std::printf("MAE   %s +/- %s\nRMSE  %s +/- %s\nr     %s\n", num(agg.at("mae_mean")).c_str(), num(agg.at("mae_std")).c_str(),
              num(agg.at("rmse_mean")).c_str(), num(agg.at("rmse_std")).c_str(), num(agg.at("pearson_r")).c_str());
  std::cout << "\nfold  label        n_test  MAE       RMSE      status\n";
  for (const auto& f : r.at("folds"))
    std::printf("%-5d %-12s %-7d %-9s %-9s %s\n", f.at("index").get<int>(), f.at("label").get<std::string>().c_str(),
                f.at("n_test").get<int>(), num(f.at("mae")).c_str(), num(f.at("rmse")).c_str(),
                f.at("status").get<std::string>().c_str());
  if (!r.at("importance").empty()) {
    std::cout << "\ntop features (folds selected, mean |w|)\n";
    std::size_t shown = 0;
    for (const auto& i : r.at("importance")) {
      if (shown++ == 15) break;
      std::printf("  %-28s %3d  %.4f\n", i.at("feature").get<std::string>().c_str(), i.at("folds_selected").get<int>(),
                  i.at("mean_abs_weight").get<double>());
    }
  }
  if (r.at("partial").get<bool>()) std::cout << "\nwarning: report is partial (some folds failed)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fatigue estimation from ECG and actigraphy: synthetic data, preprocessing, cross-validation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  struct Sub {
    CLI::App* app;
    Registry (*registry)();
    int (*run)(const Config&);
    std::string name;
  };
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // config key -> raw flag value

  auto add = [&](const std::string& name, const std::string& help, Registry (*reg)(), int (*run)(const Config&)) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("-c,--config", config_file, "JSON config of dotted keys");
    s->add_option("--set", sets, "Override a config key (key=value)")->take_all();
    return Sub{s, reg, run, name};
  };
  auto flag = [&](CLI::App* s, const std::string& opt, const std::string& key, const std::string& help) {
    s->add_option_function<std::string>(opt, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };

  std::vector<Sub> subs;
  subs.push_back(add("synth", "Generate a synthetic cohort (ECG, counts, labels, ground truth)", synth_keys, cmd_synth));
  subs.push_back(add("preprocess", "Raw CSVs -> window features -> sequence dataset", preprocess_keys, cmd_preprocess));
  subs.push_back(add("train-eval", "Cross-validate a pipeline on a dataset", train_eval_keys, cmd_train_eval));
  subs.push_back(add("grad-check", "Finite-difference check of the sequence model gradients", grad_check_keys, cmd_grad_check));
  subs.push_back(add("report", "Summarize a cross-validation report", report_keys, cmd_report));

  for (auto& s : subs) {
    if (s.name != "report") {
      flag(s.app, "--seed", "seed", "Random seed (mandatory)");
      flag(s.app, "--jobs", "jobs", "Worker threads");
      flag(s.app, "-o,--out", "out", "Output directory");
    }
  }
  flag(subs[0].app, "--subjects", "synth.n_subjects", "Number of subjects");
  flag(subs[0].app, "--days", "synth.days", "Days per subject");
  flag(subs[0].app, "--rule", "synth.rule", "Label rule");
  flag(subs[0].app, "--ecg-minutes", "synth.ecg_minutes", "ECG minutes recorded per period");
  flag(subs[1].app, "--ecg-dir", "paths.ecg_dir", "Directory of ECG CSVs");
  flag(subs[1].app, "--counts-dir", "paths.counts_dir", "Directory of counts CSVs");
  flag(subs[1].app, "--labels", "paths.labels", "Labels CSV");
  flag(subs[1].app, "--modality", "modality", "acti | ecg | both");
  flag(subs[2].app, "--dataset", "paths.dataset", "Dataset directory from preprocess");
  flag(subs[2].app, "--pipeline", "pipeline", "mean | linear | linear-fs | lstm | lstm-sa | lstm-csa");
  flag(subs[2].app, "--splitter", "splitter", "kfold | loso");
  flag(subs[2].app, "--folds", "cv.folds", "Number of folds for kfold");
  flag(subs[2].app, "--k-max", "featselect.k_max", "Maximum selected features");
  flag(subs[3].app, "--variant", "seqnet.variant", "lstm | lstm_sa | lstm_csa | all");
  flag(subs[4].app, "--report", "paths.report", "report.json or its directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      Config cfg(s.registry());
      if (!config_file.empty()) cfg.load_file(config_file);
      for (const auto& kv : sets) cfg.set_assignment(kv);
      for (const auto& [key, raw] : flags) {
        json v = json::parse(raw, nullptr, false);
        if (v.is_discarded() || key.rfind("paths.", 0) == 0 || key == "out") v = raw;
        cfg.set(key, v);
      }
      return s.run(cfg);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfig;
    } catch (const TrainingError& e) {
      std::cerr << "training error: " << e.what() << '\n';
      return kTraining;
    } catch (const std::exception& e) {
      std::cerr << "data error: " << e.what() << '\n';
      return kData;
    }
  }
  return kConfig;
}
