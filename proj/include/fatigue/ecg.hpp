#pragma once

// ECG -> cleaned 5-minute NNI windows.
//
// Pipeline per recording: band-pass, differentiate, square, integrate, then an
// adaptive-threshold peak picker (Pan-Tompkins family). Beats are converted to
// RR intervals, outliers are removed and linearly re-filled, and each window
// gets a quality verdict.

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fatigue/common.hpp"
#include "fatigue/ingest.hpp"

namespace fatigue::ecg {

inline constexpr TimeMs kWindowMs = 300'000;

struct PeakDetectorConfig {
  double band_low_hz = 5.0;
  double band_high_hz = 15.0;
  double integration_ms = 150.0;
  double refractory_ms = 200.0;
  double learning_s = 2.0;       // initial threshold estimation span
  double searchback_factor = 1.66;
};

struct CleaningConfig {
  double min_interval_ms = 300.0;
  double max_interval_ms = 2000.0;
  double max_relative_jump = 0.20;
};

struct QualityConfig {
  double min_coverage_s = 240.0;
  double max_corrected_fraction = 0.20;
  std::size_t min_nni_count = 100;
};

struct EcgConfig {
  PeakDetectorConfig peaks;
  CleaningConfig cleaning;
  QualityConfig quality;
};

struct RriSeries {
  std::vector<double> beat_times;  // ms
  std::vector<double> intervals;   // intervals[i] = beat_times[i+1] - beat_times[i]
};

struct CleanedRri {
  std::vector<double> nni;
  std::vector<bool> corrected_mask;
};

struct QualityReport {
  double coverage_s = 0.0;
  double corrected_fraction = 0.0;
  std::size_t nni_count = 0;
};

struct NniWindow {
  TimeMs window_start = 0;
  double window_len_s = 300.0;
  std::vector<double> nni;
  std::vector<bool> corrected_mask;
  // nni.size() + 1 entries: first detected beat plus the running sum of nni
  std::vector<double> beat_times;
  QualityReport quality;
  bool valid = false;
};

// ---------------------------------------------------------------------------
// Filtering

struct Biquad {
  double b0, b1, b2, a1, a2;

  // Second-order Butterworth sections via the bilinear transform.
  static Biquad lowpass(double fc, double fs) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;  // Q = 1/sqrt(2)
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }
  static Biquad highpass(double fc, double fs) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }

  void apply(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1, x1 = v, y2 = y1, y1 = y;
      v = y;
    }
  }
};

// Zero-phase band-pass: forward and reverse passes of high- and low-pass
// sections.
inline std::vector<double> bandpass_zero_phase(std::span<const double> x, double lo, double hi, double fs) {
  std::vector<double> y(x.begin(), x.end());
  const Biquad hp = Biquad::highpass(lo, fs);
  const Biquad lp = Biquad::lowpass(std::min(hi, 0.45 * fs), fs);
  hp.apply(y);
  lp.apply(y);
  std::reverse(y.begin(), y.end());
  hp.apply(y);
  lp.apply(y);
  std::reverse(y.begin(), y.end());
  return y;
}

// Centered moving average over an odd number of samples.
inline std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
  if (width % 2 == 0) ++width;
  const std::size_t half = width / 2;
  std::vector<double> out(x.size(), 0.0);
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(width);
  }
  return out;
}

// Derivative-squared-integrated feature signal the peak picker runs on.
inline std::vector<double> qrs_energy(std::span<const double> samples, int fs, const PeakDetectorConfig& cfg) {
  const auto bp = bandpass_zero_phase(samples, cfg.band_low_hz, cfg.band_high_hz, fs);
  const std::size_t n = bp.size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    const double d = (-bp[i - 2] - 2.0 * bp[i - 1] + 2.0 * bp[i + 1] + bp[i + 2]) * fs / 8.0;
    sq[i] = d * d;
  }
  const auto width = static_cast<std::size_t>(std::max(1.0, std::round(cfg.integration_ms * fs / 1000.0)));
  return moving_average(sq, width);
}

namespace detail {

// Parabolic refinement of a sample-domain maximum.
inline double refine_peak(std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return static_cast<double>(i);
  const double a = x[i - 1], b = x[i], c = x[i + 1];
  const double denom = a - 2.0 * b + c;
  if (!(denom < 0.0)) return static_cast<double>(i);
  const double off = 0.5 * (a - c) / denom;
  return static_cast<double>(i) + std::clamp(off, -0.5, 0.5);
}

}  // namespace detail

// Returns R-peak times in absolute ms, strictly increasing, no two closer than
// the refractory period.
inline std::vector<double> detect_r_peaks(const EcgRecord& record, const PeakDetectorConfig& cfg = {}) {
  if (record.sample_rate_hz <= 0) throw InputError("invalid sample rate");
  if (record.duration_s() < 10.0) throw InputError("ECG record shorter than 10 s");
  const int fs = record.sample_rate_hz;
  const auto& x = record.samples;
  const auto energy = qrs_energy(x, fs, cfg);
  const std::size_t n = energy.size();
  const auto refractory = static_cast<std::size_t>(std::ceil(cfg.refractory_ms * fs / 1000.0));

  const auto learn = std::min(n, static_cast<std::size_t>(cfg.learning_s * fs));
  double spk = 0.0, npk = 0.0;
  for (std::size_t i = 0; i < learn; ++i) {
    spk = std::max(spk, energy[i]);
    npk += energy[i];
  }
  spk *= 0.25;
  npk = learn > 0 ? 0.5 * npk / static_cast<double>(learn) : 0.0;

  std::vector<std::size_t> qrs;
  std::vector<std::size_t> noise_since_last;
  std::deque<double> recent_rr;

  auto threshold = [&] { return npk + 0.25 * (spk - npk); };
  auto accept = [&](std::size_t p, double weight) {
    if (!qrs.empty()) {
      recent_rr.push_back(static_cast<double>(p - qrs.back()));
      if (recent_rr.size() > 8) recent_rr.pop_front();
    }
    qrs.push_back(p);
    spk = weight * energy[p] + (1.0 - weight) * spk;
    noise_since_last.clear();
  };

  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double v = energy[i];
    if (!(v > 0.0) || !(v > energy[i - 1]) || !(v >= energy[i + 1])) continue;

    // search back for a missed beat when the current gap is unusually long
    if (!qrs.empty() && recent_rr.size() >= 2) {
      const double rr_avg = std::accumulate(recent_rr.begin(), recent_rr.end(), 0.0) / recent_rr.size();
      if (static_cast<double>(i - qrs.back()) > cfg.searchback_factor * rr_avg) {
        std::size_t best = 0;
        double best_v = 0.5 * threshold();
        for (std::size_t c : noise_since_last)
          if (c - qrs.back() >= refractory && i - c >= refractory && energy[c] > best_v) best = c, best_v = energy[c];
        if (best != 0) accept(best, 0.25);
      }
    }

    if (!qrs.empty() && i - qrs.back() < refractory) {
      if (v > energy[qrs.back()]) {
        qrs.back() = i;
        spk = 0.125 * v + 0.875 * spk;
      }
      continue;
    }
    if (v > threshold()) {
      accept(i, 0.125);
    } else {
      npk = 0.125 * v + 0.875 * npk;
      noise_since_last.push_back(i);
    }
  }

  // Locate each R peak on the raw trace near the energy peak.
  const auto search = static_cast<std::size_t>(std::ceil(0.5 * cfg.integration_ms * fs / 1000.0));
  std::vector<double> beats;
  std::vector<double> heights;
  beats.reserve(qrs.size());
  for (std::size_t p : qrs) {
    const std::size_t lo = p >= search ? p - search : 0;
    const std::size_t hi = std::min(x.size() - 1, p + search);
    std::size_t arg = lo;
    for (std::size_t j = lo; j <= hi; ++j)
      if (x[j] > x[arg]) arg = j;
    const double pos = detail::refine_peak(x, arg);
    const double t = static_cast<double>(record.start_time_ms) + pos * 1000.0 / fs;
    if (!beats.empty() && t - beats.back() < cfg.refractory_ms) {
      // two energy peaks refined onto the same beat: keep the taller
      if (x[arg] > heights.back()) beats.back() = t, heights.back() = x[arg];
      continue;
    }
    beats.push_back(t);
    heights.push_back(x[arg]);
  }
  return beats;
}

inline RriSeries compute_rri(std::span<const double> beat_times) {
  if (beat_times.size() < 2) throw InputError("need at least 2 beats to form an interval");
  RriSeries r;
  r.beat_times.assign(beat_times.begin(), beat_times.end());
  r.intervals.reserve(beat_times.size() - 1);
  for (std::size_t i = 0; i + 1 < beat_times.size(); ++i) {
    const double d = beat_times[i + 1] - beat_times[i];
    if (!(d > 0.0)) throw InputError("beat times must be strictly increasing");
    r.intervals.push_back(d);
  }
  return r;
}

// Removes an interval when it is outside [min, max] or jumps by more than
// max_relative_jump relative to the previous RETAINED interval; removed
// positions are linearly interpolated between retained neighbours, with
// nearest-value fill at the ends.
inline CleanedRri clean_rri(std::span<const double> intervals, const CleaningConfig& cfg = {}) {
  if (intervals.empty()) throw InputError("no intervals to clean");
  const std::size_t n = intervals.size();
  std::vector<bool> removed(n, false);
  double prev = 0.0;
  bool have_prev = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = intervals[i];
    if (v < cfg.min_interval_ms || v > cfg.max_interval_ms ||
        (have_prev && std::abs(v - prev) > cfg.max_relative_jump * prev)) {
      removed[i] = true;
      continue;
    }
    prev = v;
    have_prev = true;
  }
  if (!have_prev) throw QualityError("every interval in the window was removed");

  CleanedRri out;
  out.nni.assign(intervals.begin(), intervals.end());
  out.corrected_mask = removed;
  std::size_t last = n;  // index of the previous retained interval, n = none yet
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    if (last == n) {
      for (std::size_t j = 0; j < i; ++j) out.nni[j] = intervals[i];
    } else {
      const double a = intervals[last], b = intervals[i];
      const double span = static_cast<double>(i - last);
      for (std::size_t j = last + 1; j < i; ++j) out.nni[j] = a + (b - a) * static_cast<double>(j - last) / span;
    }
    last = i;
  }
  for (std::size_t j = last + 1; j < n; ++j) out.nni[j] = intervals[last];
  return out;
}

inline CleanedRri clean_rri(const RriSeries& rri, const CleaningConfig& cfg = {}) {
  return clean_rri(std::span<const double>(rri.intervals), cfg);
}

inline QualityReport quality_of(std::span<const double> nni, const std::vector<bool>& mask) {
  QualityReport q;
  q.nni_count = nni.size();
  if (nni.empty()) return q;
  q.coverage_s = std::min(300.0, std::accumulate(nni.begin(), nni.end(), 0.0) / 1000.0);
  q.corrected_fraction =
      static_cast<double>(std::count(mask.begin(), mask.end(), true)) / static_cast<double>(nni.size());
  return q;
}

struct QualityVerdict {
  QualityReport report;
  bool valid = false;
};

inline QualityVerdict assess_quality(const QualityReport& q, const QualityConfig& cfg = {}) {
  return {q, q.coverage_s >= cfg.min_coverage_s && q.corrected_fraction <= cfg.max_corrected_fraction &&
                 q.nni_count >= cfg.min_nni_count};
}

inline QualityVerdict assess_quality(const NniWindow& w, const QualityConfig& cfg = {}) {
  return assess_quality(quality_of(w.nni, w.corrected_mask), cfg);
}

// Builds one window from the beats that fall inside [start, start + 300 s).
inline NniWindow make_window(TimeMs start, std::span<const double> beats_in_window, const EcgConfig& cfg = {}) {
  NniWindow w;
  w.window_start = start;
  if (beats_in_window.size() < 2) return w;
  try {
    const auto rri = compute_rri(beats_in_window);
    auto cleaned = clean_rri(rri, cfg.cleaning);
    w.nni = std::move(cleaned.nni);
    w.corrected_mask = std::move(cleaned.corrected_mask);
  } catch (const QualityError&) {
    return w;
  }
  w.beat_times.resize(w.nni.size() + 1);
  w.beat_times[0] = beats_in_window.front();
  for (std::size_t i = 0; i < w.nni.size(); ++i) w.beat_times[i + 1] = w.beat_times[i] + w.nni[i];
  const auto verdict = assess_quality(w, cfg.quality);
  w.quality = verdict.report;
  w.valid = verdict.valid;
  return w;
}

// Cuts the part of `record` that overlaps `segment` into consecutive 300 s
// windows aligned to the segment start. Only windows fully covered by the
// recording are produced.
inline std::vector<NniWindow> window_ecg(const EcgRecord& record, const SegmentBounds& segment,
                                         const EcgConfig& cfg = {}) {
  std::vector<NniWindow> windows;
  const TimeMs rec_start = record.start_time_ms;
  const TimeMs rec_end = record.end_time_ms();
  std::vector<TimeMs> starts;
  for (TimeMs ws = segment.start_ms; ws + kWindowMs <= segment.end_ms; ws += kWindowMs)
    if (ws >= rec_start && ws + kWindowMs <= rec_end) starts.push_back(ws);
  if (starts.empty()) return windows;

  // Detect once over the covered span, with a little context for the filters.
  const double fs = record.sample_rate_hz;
  const TimeMs margin = 2000;
  const TimeMs span_start = std::max(rec_start, starts.front() - margin);
  const TimeMs span_end = std::min(rec_end, starts.back() + kWindowMs + margin);
  const auto i0 = static_cast<std::size_t>(std::ceil(static_cast<double>(span_start - rec_start) * fs / 1000.0));
  const auto i1 = std::min(record.samples.size(),
                           static_cast<std::size_t>(std::floor(static_cast<double>(span_end - rec_start) * fs / 1000.0)));
  EcgRecord slice;
  slice.subject_id = record.subject_id;
  slice.sample_rate_hz = record.sample_rate_hz;
  slice.start_time_ms = rec_start;  // beat times computed below relative to the true sample index
  slice.samples.assign(record.samples.begin() + static_cast<long>(i0), record.samples.begin() + static_cast<long>(i1));
  auto beats = detect_r_peaks(slice, cfg.peaks);
  const double shift = static_cast<double>(i0) * 1000.0 / fs;
  for (double& b : beats) b += shift;

  for (TimeMs ws : starts) {
    const auto lo = std::lower_bound(beats.begin(), beats.end(), static_cast<double>(ws));
    const auto hi = std::lower_bound(beats.begin(), beats.end(), static_cast<double>(ws + kWindowMs));
    windows.push_back(make_window(ws, std::span<const double>(lo, hi), cfg));
  }
  return windows;
}

// Debug dump: t_ms is the closing beat time of each interval.
inline void write_window_csv(const NniWindow& w, const std::string& path) {
  auto out = fatigue::detail::open_output(path);
  out << "t_ms,nni_ms,corrected\n";
  for (std::size_t i = 0; i < w.nni.size(); ++i)
    out << format_double(w.beat_times[i + 1]) << ',' << format_double(w.nni[i]) << ','
        << (w.corrected_mask[i] ? 1 : 0) << '\n';
}

}  // namespace fatigue::ecg
