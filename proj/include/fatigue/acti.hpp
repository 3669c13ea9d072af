#pragma once

// Actigraphy counts: non-wear detection on 30 s epochs and eight summary
// statistics per 5-minute window.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "fatigue/common.hpp"
#include "fatigue/ingest.hpp"
#include "fatigue/stats.hpp"

namespace fatigue::acti {

inline constexpr std::size_t kActiCount = 8;
inline constexpr std::size_t kEpochsPerWindow = 10;

inline constexpr std::array<std::string_view, kActiCount> kActiNames = {
    "acti_mean", "acti_median", "acti_std", "acti_var", "acti_min", "acti_max", "acti_skew", "acti_kurt"};

using ActiVector = std::array<double, kActiCount>;

// Troiano-style rule. A non-wear run is >= min_run_minutes of zero counts,
// tolerating interior interruptions of at most max_interrupt_minutes where
// every epoch stays below interrupt_max_cpm (counts per minute).
struct NonwearConfig {
  double min_run_minutes = 60.0;
  double max_interrupt_minutes = 2.0;
  double interrupt_max_cpm = 100.0;
};

// Returns true for worn epochs.
inline std::vector<bool> detect_nonwear(const CountsRecord& record, const NonwearConfig& cfg = {}) {
  const auto& c = record.counts;
  const std::size_t n = c.size();
  const double epochs_per_min = 60'000.0 / static_cast<double>(kEpochMs);
  const auto min_run = static_cast<std::size_t>(std::ceil(cfg.min_run_minutes * epochs_per_min));
  const auto max_gap = static_cast<std::size_t>(std::floor(cfg.max_interrupt_minutes * epochs_per_min));
  const double max_epoch_count = cfg.interrupt_max_cpm / epochs_per_min;

  std::vector<bool> wear(n, true);
  std::size_t i = 0;
  while (i < n) {
    if (c[i] != 0) {
      ++i;
      continue;
    }
    // Extend a zero run starting at i across tolerated interruptions.
    std::size_t end = i;  // last zero epoch of the run
    std::size_t j = i;
    while (j < n) {
      if (c[j] == 0) {
        end = j++;
        continue;
      }
      std::size_t k = j;
      while (k < n && c[k] != 0 && static_cast<double>(c[k]) < max_epoch_count && k - j < max_gap) ++k;
      const bool tolerated = k < n && c[k] == 0 && k - j <= max_gap;
      if (!tolerated) break;
      j = k;
    }
    if (end - i + 1 >= min_run)
      for (std::size_t e = i; e <= end; ++e) wear[e] = false;
    i = end + 1;
  }
  return wear;
}

// mean, median, std, variance, min, max, skewness, excess kurtosis.
inline ActiVector window_stats(std::span<const double> counts) {
  if (counts.empty()) throw InputError("window_stats needs at least one epoch");
  ActiVector f{};
  f[0] = stats::mean(counts);
  f[1] = stats::median(counts);
  f[3] = stats::variance(counts);
  f[2] = std::sqrt(f[3]);
  f[4] = *std::min_element(counts.begin(), counts.end());
  f[5] = *std::max_element(counts.begin(), counts.end());
  f[6] = stats::skewness(counts);
  f[7] = stats::kurtosis(counts);
  return f;
}

struct ActiWindow {
  TimeMs window_start = 0;
  std::vector<std::int64_t> epoch_counts;
  bool wear = false;
  ActiVector features{};
};

// 300 s windows aligned to the segment start; a window needs exactly ten
// epochs starting inside it, all worn, to be valid.
inline std::vector<ActiWindow> window_acti(const CountsRecord& record, const std::vector<bool>& wear_mask,
                                           const SegmentBounds& segment) {
  std::vector<ActiWindow> out;
  const auto& t = record.epoch_start_ms;
  for (TimeMs ws = segment.start_ms; ws + 300'000 <= segment.end_ms; ws += 300'000) {
    const auto lo = std::lower_bound(t.begin(), t.end(), ws) - t.begin();
    const auto hi = std::lower_bound(t.begin(), t.end(), ws + 300'000) - t.begin();
    if (hi - lo != static_cast<long>(kEpochsPerWindow)) continue;
    ActiWindow w;
    w.window_start = ws;
    w.wear = true;
    std::vector<double> vals;
    for (auto e = lo; e < hi; ++e) {
      w.epoch_counts.push_back(record.counts[static_cast<std::size_t>(e)]);
      vals.push_back(static_cast<double>(record.counts[static_cast<std::size_t>(e)]));
      if (!wear_mask[static_cast<std::size_t>(e)]) w.wear = false;
    }
    if (w.wear) w.features = window_stats(vals);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace fatigue::acti
