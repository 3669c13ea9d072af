#pragma once

// Raw recordings -> per-segment window features -> sequences. Shared by the
// `preprocess` subcommand and in-memory experiments.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fatigue/acti.hpp"
#include "fatigue/ecg.hpp"
#include "fatigue/fusion.hpp"
#include "fatigue/hrv.hpp"
#include "fatigue/ingest.hpp"

namespace fatigue::pipeline {

struct PreprocessConfig {
  fusion::Modality modality = fusion::Modality::both;
  int tz_offset_min = 0;
  std::map<std::string, int> tz_by_subject;  // overrides tz_offset_min
  ecg::EcgConfig ecg;
  hrv::FrequencyConfig freq;
  acti::NonwearConfig nonwear;
  fusion::FusionConfig fusion;
  int jobs = 1;

  int tz_for(const std::string& subject) const {
    const auto it = tz_by_subject.find(subject);
    return it == tz_by_subject.end() ? tz_offset_min : it->second;
  }
};

// Every 6 h segment that overlaps [start, end).
inline std::vector<std::pair<SegmentKey, SegmentBounds>> segments_overlapping(const std::string& subject, TimeMs start,
                                                                              TimeMs end, int tz) {
  std::vector<std::pair<SegmentKey, SegmentBounds>> out;
  if (end <= start) return out;
  auto slot = assign_period(start, tz);
  auto b = segment_bounds(slot.date, slot.period, tz);
  while (b.start_ms < end) {
    out.push_back({SegmentKey{subject, slot.date, slot.period}, b});
    slot = assign_period(b.end_ms, tz);
    b = segment_bounds(slot.date, slot.period, tz);
  }
  return out;
}

// Valid windows get their HRV vector; invalid ones are kept (flagged) so the
// fusion step can count them.
inline std::vector<fusion::EcgWindowFeatures> ecg_window_features(const EcgRecord& record, const SegmentBounds& seg,
                                                                  const ecg::EcgConfig& cfg = {},
                                                                  const hrv::FrequencyConfig& freq = {}) {
  std::vector<fusion::EcgWindowFeatures> out;
  for (const auto& w : ecg::window_ecg(record, seg, cfg)) {
    fusion::EcgWindowFeatures f;
    f.window_start = w.window_start;
    f.valid = w.valid;
    if (w.valid) f.features = hrv::hrv_features(w, freq);
    out.push_back(f);
  }
  return out;
}

struct Inputs {
  std::vector<std::filesystem::path> ecg_files;
  std::vector<std::filesystem::path> counts_files;
  std::vector<FatigueLabel> labels;
};

inline std::vector<std::filesystem::path> csv_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (dir.empty()) return out;
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}
}  // namespace detail

// Reads raw files, extracts window features per segment and assembles the
// sequence dataset. Segments are ordered by key so output is independent of
// file order and thread count.
inline fusion::BuildResult preprocess(const Inputs& in, const PreprocessConfig& cfg) {
  std::map<SegmentKey, fusion::SegmentWindows> segs;
  auto touch = [&](const SegmentKey& k, const SegmentBounds& b) -> fusion::SegmentWindows& {
    auto& s = segs[k];
    s.key = k;
    s.bounds = b;
    return s;
  };

  if (fusion::uses_ecg(cfg.modality)) {
    std::vector<std::vector<std::pair<SegmentKey, fusion::SegmentWindows>>> per_file(in.ecg_files.size());
    detail::parallel_for(in.ecg_files.size(), cfg.jobs, [&](std::size_t i) {
      const auto rec = read_ecg_csv(in.ecg_files[i].string());
      const int tz = cfg.tz_for(rec.subject_id);
      for (const auto& [key, bounds] : segments_overlapping(rec.subject_id, rec.start_time_ms, rec.end_time_ms(), tz)) {
        fusion::SegmentWindows w;
        w.key = key;
        w.bounds = bounds;
        w.ecg = ecg_window_features(rec, bounds, cfg.ecg, cfg.freq);
        per_file[i].push_back({key, std::move(w)});
      }
    });
    for (auto& file : per_file)
      for (auto& [key, w] : file) {
        auto& s = touch(key, w.bounds);
        // Overlapping recordings: the first valid window at a start time wins.
        for (auto& f : w.ecg) {
          auto it = std::find_if(s.ecg.begin(), s.ecg.end(), [&](const auto& e) { return e.window_start == f.window_start; });
          if (it == s.ecg.end()) s.ecg.push_back(f);
          else if (!it->valid && f.valid) *it = f;
        }
      }
  }

  if (fusion::uses_acti(cfg.modality)) {
    for (const auto& path : in.counts_files) {
      const auto rec = read_counts_csv(path.string());
      if (rec.counts.empty()) continue;
      const auto wear = acti::detect_nonwear(rec, cfg.nonwear);
      const int tz = cfg.tz_for(rec.subject_id);
      for (const auto& [key, bounds] :
           segments_overlapping(rec.subject_id, rec.epoch_start_ms.front(), rec.epoch_start_ms.back() + kEpochMs, tz)) {
        auto windows = acti::window_acti(rec, wear, bounds);
        if (windows.empty()) continue;
        auto& s = touch(key, bounds);
        for (auto& w : windows) s.acti.push_back(std::move(w));
      }
    }
  }

  std::vector<fusion::SegmentWindows> ordered;
  ordered.reserve(segs.size());
  for (auto& [k, s] : segs) {
    std::sort(s.ecg.begin(), s.ecg.end(), [](const auto& a, const auto& b) { return a.window_start < b.window_start; });
    ordered.push_back(std::move(s));
  }
  return fusion::build_sequences(ordered, in.labels, cfg.modality, cfg.fusion);
}

}  // namespace fatigue::pipeline
