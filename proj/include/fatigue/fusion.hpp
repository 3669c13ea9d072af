#pragma once

// Builds per-segment feature sequences from ECG and actigraphy windows on a
// shared 5-minute wall-clock grid.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fatigue/acti.hpp"
#include "fatigue/common.hpp"
#include "fatigue/hrv.hpp"
#include "fatigue/ingest.hpp"

namespace fatigue::fusion {

enum class Modality { acti, ecg, both };

inline std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::acti: return "acti";
    case Modality::ecg: return "ecg";
    case Modality::both: return "both";
  }
  return "?";
}

inline std::optional<Modality> parse_modality(std::string_view s) {
  for (auto m : {Modality::acti, Modality::ecg, Modality::both})
    if (modality_name(m) == s) return m;
  return std::nullopt;
}

inline bool uses_ecg(Modality m) { return m != Modality::acti; }
inline bool uses_acti(Modality m) { return m != Modality::ecg; }

inline std::vector<std::string> feature_names(Modality m) {
  std::vector<std::string> names;
  if (uses_ecg(m))
    for (auto n : hrv::kHrvNames) names.emplace_back(n);
  if (uses_acti(m))
    for (auto n : acti::kActiNames) names.emplace_back(n);
  return names;
}

struct EcgWindowFeatures {
  TimeMs window_start = 0;
  bool valid = false;
  hrv::HrvVector features{};
};

struct SegmentWindows {
  SegmentKey key;
  SegmentBounds bounds;
  std::vector<EcgWindowFeatures> ecg;
  std::vector<acti::ActiWindow> acti;
};

struct SequenceSample {
  SegmentKey key;
  Eigen::MatrixXd X;  // T x D, NaN marks a flagged-missing feature value
  std::vector<TimeMs> timestamps;
  double y = 0.0;
  Modality modality = Modality::both;

  Eigen::Index length() const { return X.rows(); }
};

struct Dataset {
  std::vector<SequenceSample> samples;
  std::set<std::string> subjects;
  std::vector<std::string> feature_names;
  Modality modality = Modality::both;
};

struct FusionConfig {
  std::size_t min_windows = 20;  // 100 minutes of usable data
};

// Per-rule drop counters, written into the preprocessing manifest.
struct DropStats {
  std::size_t segments_seen = 0;
  std::size_t segments_kept = 0;
  std::size_t segments_no_label = 0;
  std::size_t segments_too_short = 0;
  std::size_t grid_windows = 0;
  std::size_t windows_kept = 0;
  std::size_t windows_ecg_invalid = 0;
  std::size_t windows_ecg_absent = 0;
  std::size_t windows_acti_nonwear = 0;
  std::size_t windows_acti_absent = 0;
};

struct BuildResult {
  Dataset dataset;
  DropStats drops;
};

namespace detail {
inline void check_grid(TimeMs t, const SegmentWindows& seg) {
  if (t < seg.bounds.start_ms || t + 300'000 > seg.bounds.end_ms || (t - seg.bounds.start_ms) % 300'000 != 0)
    throw AlignmentError("window at " + std::to_string(t) + " is off the 5-minute grid of " + seg.key.str());
}
}  // namespace detail

inline BuildResult build_sequences(const std::vector<SegmentWindows>& segments,
                                   const std::vector<FatigueLabel>& labels, Modality modality,
                                   const FusionConfig& cfg = {}) {
  std::map<SegmentKey, int> score;
  for (const auto& l : labels) score[l.key()] = l.score;

  BuildResult out;
  out.dataset.modality = modality;
  out.dataset.feature_names = feature_names(modality);
  const auto d = static_cast<Eigen::Index>(out.dataset.feature_names.size());
  auto& drops = out.drops;

  for (const auto& seg : segments) {
    out.dataset.subjects.insert(seg.key.subject_id);
    ++drops.segments_seen;
    std::map<TimeMs, const EcgWindowFeatures*> ecg;
    std::map<TimeMs, const acti::ActiWindow*> act;
    for (const auto& w : seg.ecg) {
      detail::check_grid(w.window_start, seg);
      ecg[w.window_start] = &w;
    }
    for (const auto& w : seg.acti) {
      detail::check_grid(w.window_start, seg);
      act[w.window_start] = &w;
    }

    std::vector<TimeMs> kept;
    for (TimeMs t = seg.bounds.start_ms; t + 300'000 <= seg.bounds.end_ms; t += 300'000) {
      const auto e = ecg.find(t);
      const auto a = act.find(t);
      const bool has_e = e != ecg.end(), has_a = a != act.end();
      if (!(uses_ecg(modality) && has_e) && !(uses_acti(modality) && has_a)) continue;  // no data here
      ++drops.grid_windows;
      bool ok = true;
      if (uses_ecg(modality)) {
        if (!has_e) ++drops.windows_ecg_absent, ok = false;
        else if (!e->second->valid) ++drops.windows_ecg_invalid, ok = false;
      }
      if (uses_acti(modality)) {
        if (!has_a) ++drops.windows_acti_absent, ok = false;
        else if (!a->second->wear) ++drops.windows_acti_nonwear, ok = false;
      }
      if (ok) kept.push_back(t);
    }

    const auto label = score.find(seg.key);
    if (label == score.end()) {
      ++drops.segments_no_label;
      continue;
    }
    if (kept.size() < cfg.min_windows) {
      ++drops.segments_too_short;
      continue;
    }

    SequenceSample s;
    s.key = seg.key;
    s.y = label->second;
    s.modality = modality;
    s.timestamps = kept;
    s.X.resize(static_cast<Eigen::Index>(kept.size()), d);
    for (std::size_t r = 0; r < kept.size(); ++r) {
      Eigen::Index c = 0;
      if (uses_ecg(modality))
        for (double v : ecg.at(kept[r])->features) s.X(static_cast<Eigen::Index>(r), c++) = v;
      if (uses_acti(modality))
        for (double v : act.at(kept[r])->features) s.X(static_cast<Eigen::Index>(r), c++) = v;
    }
    drops.windows_kept += kept.size();
    ++drops.segments_kept;
    out.dataset.samples.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: <dir>/index.csv, <dir>/subjects.csv and one directory per
// sample under <dir>/samples/<key>/ holding X.csv, meta.csv and timestamps.csv.

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "samples");
  {
    auto idx = fatigue::detail::open_output((dir / "index.csv").string());
    idx << "sample,subject_id,date,period,y,T,modality\n";
    for (const auto& s : ds.samples)
      idx << s.key.str() << ',' << s.key.subject_id << ',' << format_date(s.key.date) << ','
          << period_name(s.key.period) << ',' << format_double(s.y) << ',' << s.X.rows() << ','
          << modality_name(s.modality) << '\n';
  }
  {
    auto subj = fatigue::detail::open_output((dir / "subjects.csv").string());
    subj << "subject_id\n";
    for (const auto& s : ds.subjects) subj << s << '\n';
  }
  for (const auto& s : ds.samples) {
    const auto sd = dir / "samples" / s.key.str();
    fs::create_directories(sd);
    auto x = fatigue::detail::open_output((sd / "X.csv").string());
    for (std::size_t c = 0; c < ds.feature_names.size(); ++c) x << (c ? "," : "") << ds.feature_names[c];
    x << '\n';
    for (Eigen::Index r = 0; r < s.X.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.X.cols(); ++c) x << (c ? "," : "") << format_double(s.X(r, c));
      x << '\n';
    }
    auto m = fatigue::detail::open_output((sd / "meta.csv").string());
    m << "subject_id,date,period,y,modality\n"
      << s.key.subject_id << ',' << format_date(s.key.date) << ',' << period_name(s.key.period) << ','
      << format_double(s.y) << ',' << modality_name(s.modality) << '\n';
    auto t = fatigue::detail::open_output((sd / "timestamps.csv").string());
    t << "window_start_ms\n";
    for (TimeMs ts : s.timestamps) t << ts << '\n';
  }
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::string line;
  {
    auto subj = fatigue::detail::open_input((dir / "subjects.csv").string());
    std::getline(subj, line);
    while (std::getline(subj, line))
      if (!line.empty()) ds.subjects.insert(line);
  }
  auto idx = fatigue::detail::open_input((dir / "index.csv").string());
  fatigue::detail::expect_header(idx, "sample,subject_id,date,period,y,T,modality", (dir / "index.csv").string());
  bool first = true;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7) throw ParseError("malformed dataset index row");
    SequenceSample s;
    auto date = parse_date(f[2]);
    auto period = parse_period(f[3]);
    auto modality = parse_modality(f[6]);
    if (!date || !period || !modality || !parse_double(f[4], s.y)) throw ParseError("malformed dataset index row");
    s.key = {std::string(f[1]), *date, *period};
    s.modality = *modality;
    const auto sd = dir / "samples" / std::string(f[0]);

    auto x = fatigue::detail::open_input((sd / "X.csv").string());
    std::getline(x, line);
    std::vector<std::string> names;
    for (auto n : split_csv_line(line)) names.emplace_back(n);
    if (first) {
      ds.feature_names = names;
      ds.modality = s.modality;
      first = false;
    } else if (names != ds.feature_names || s.modality != ds.modality) {
      throw SchemaError("inconsistent feature columns across dataset samples");
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(x, line)) {
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != names.size()) throw ParseError("ragged row in " + (sd / "X.csv").string());
      auto& row = rows.emplace_back(cells.size());
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (!parse_double(cells[c], row[c])) throw ParseError("bad value in " + (sd / "X.csv").string());
    }
    s.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < names.size(); ++c) s.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];

    auto t = fatigue::detail::open_input((sd / "timestamps.csv").string());
    std::getline(t, line);
    while (std::getline(t, line)) {
      if (line.empty()) continue;
      TimeMs ts = 0;
      if (!parse_int(line, ts)) throw ParseError("bad timestamp in " + (sd / "timestamps.csv").string());
      s.timestamps.push_back(ts);
    }
    ds.subjects.insert(s.key.subject_id);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace fatigue::fusion
