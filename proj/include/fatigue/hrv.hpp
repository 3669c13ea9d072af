#pragma once

// The 30 heart-rate-variability features computed per valid NNI window, in
// four groups: time, frequency, non-linear and geometrical. Feature order is
// fixed (see kHrvNames and docs/hrv_features.md).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fatigue/common.hpp"
#include "fatigue/ecg.hpp"

namespace fatigue::hrv {

inline constexpr std::size_t kHrvCount = 30;

inline constexpr std::array<std::string_view, kHrvCount> kHrvNames = {
    "min_hr",   "max_hr",  "mean_hr",     "std_hr",  "sdsd",           "sdnn",      "nn_mean", "nn20",
    "nn50",     "pnn50",   "pnn20",       "rmssd",   "median_nn",      "range_nn",  "cvsd",    "cv_nni",
    "total_power", "lf",   "hf",          "vlf",     "lf_hf",          "lf_norm",   "hf_norm", "csi",
    "csi_mod",  "sd1",     "sd2",         "sd1_sd2", "cvi",            "triangular_index"};

using HrvVector = std::array<double, kHrvCount>;

inline std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kHrvCount; ++i)
    if (kHrvNames[i] == name) return i;
  throw InputError("unknown HRV feature " + std::string(name));
}

// ---------------------------------------------------------------------------
// Time domain

struct TimeDomain {
  double min_hr, max_hr, mean_hr, std_hr;
  double sdsd, sdnn, nn_mean;
  double nn20, nn50, pnn50, pnn20;
  double rmssd, median_nn, range_nn, cvsd, cv_nni;
};

inline double population_std(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline TimeDomain time_domain(std::span<const double> nni) {
  if (nni.size() < 2) throw InputError("time-domain HRV needs at least 2 NNIs");
  const std::size_t n = nni.size();
  TimeDomain t{};

  std::vector<double> hr(n);
  for (std::size_t i = 0; i < n; ++i) hr[i] = 60000.0 / nni[i];
  t.min_hr = *std::min_element(hr.begin(), hr.end());
  t.max_hr = *std::max_element(hr.begin(), hr.end());
  double hr_sum = 0.0;
  for (double h : hr) hr_sum += h;
  t.mean_hr = hr_sum / static_cast<double>(n);
  t.std_hr = population_std(hr);

  std::vector<double> diff(n - 1);
  double sq = 0.0;
  std::size_t over20 = 0, over50 = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    diff[i] = nni[i + 1] - nni[i];
    sq += diff[i] * diff[i];
    if (std::abs(diff[i]) > 20.0) ++over20;
    if (std::abs(diff[i]) > 50.0) ++over50;
  }
  const auto pairs = static_cast<double>(n - 1);
  t.sdsd = population_std(diff);
  t.sdnn = population_std(nni);
  double sum = 0.0;
  for (double v : nni) sum += v;
  t.nn_mean = sum / static_cast<double>(n);
  t.nn20 = static_cast<double>(over20);
  t.nn50 = static_cast<double>(over50);
  t.pnn20 = t.nn20 / pairs;
  t.pnn50 = t.nn50 / pairs;
  t.rmssd = std::sqrt(sq / pairs);

  std::vector<double> sorted(nni.begin(), nni.end());
  std::sort(sorted.begin(), sorted.end());
  t.median_nn = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  t.range_nn = sorted.back() - sorted.front();
  t.cvsd = t.rmssd / t.nn_mean;
  t.cv_nni = t.sdnn / t.nn_mean;
  return t;
}

// ---------------------------------------------------------------------------
// Frequency domain

struct FrequencyConfig {
  double resample_hz = 4.0;
  std::size_t segment_len = 256;
  double vlf_lo = 0.003, vlf_hi = 0.04;
  double lf_lo = 0.04, lf_hi = 0.15;
  double hf_lo = 0.15, hf_hi = 0.40;
};

struct Psd {
  std::vector<double> freq_hz;
  std::vector<double> power;  // ms^2 / Hz, one-sided
};

// Linear interpolation of (t, v) samples onto a uniform grid starting at t[0].
inline std::vector<double> resample_uniform(std::span<const double> t_ms, std::span<const double> v, double fs_hz) {
  std::vector<double> out;
  const double step = 1000.0 / fs_hz;
  std::size_t j = 0;
  for (double t = t_ms.front(); t <= t_ms.back(); t += step) {
    while (j + 1 < t_ms.size() && t_ms[j + 1] < t) ++j;
    if (j + 1 >= t_ms.size()) {
      out.push_back(v.back());
      continue;
    }
    const double a = (t - t_ms[j]) / (t_ms[j + 1] - t_ms[j]);
    out.push_back(v[j] + a * (v[j + 1] - v[j]));
  }
  return out;
}

// Welch estimate: periodic Hann window, 50% overlap, density scaling.
// Inputs shorter than one segment use a single full-length segment.
inline Psd welch(std::span<const double> x, double fs, std::size_t segment_len) {
  const std::size_t nseg = std::min(segment_len, x.size());
  const std::size_t step = std::max<std::size_t>(1, nseg / 2);
  std::vector<double> window(nseg);
  double wss = 0.0;
  for (std::size_t i = 0; i < nseg; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nseg));
    wss += window[i] * window[i];
  }
  const std::size_t nbins = nseg / 2 + 1;
  Psd psd;
  psd.freq_hz.resize(nbins);
  psd.power.assign(nbins, 0.0);
  for (std::size_t k = 0; k < nbins; ++k) psd.freq_hz[k] = static_cast<double>(k) * fs / static_cast<double>(nseg);

  Eigen::FFT<double> fft;
  std::vector<double> buf(nseg);
  std::vector<std::complex<double>> spec;
  std::size_t count = 0;
  for (std::size_t start = 0; start + nseg <= x.size(); start += step) {
    for (std::size_t i = 0; i < nseg; ++i) buf[i] = x[start + i] * window[i];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k < nbins; ++k) {
      double p = std::norm(spec[k]) / (fs * wss);
      if (k != 0 && !(nseg % 2 == 0 && k == nseg / 2)) p *= 2.0;
      psd.power[k] += p;
    }
    ++count;
  }
  for (double& p : psd.power) p /= static_cast<double>(count);
  return psd;
}

// Trapezoidal integral over the PSD bins lying in [lo, hi).
inline double band_power(const Psd& psd, double lo, double hi) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < psd.freq_hz.size(); ++k) {
    const double f0 = psd.freq_hz[k], f1 = psd.freq_hz[k + 1];
    if (f0 >= lo && f1 < hi) total += 0.5 * (f1 - f0) * (psd.power[k] + psd.power[k + 1]);
  }
  return total;
}

struct FrequencyDomain {
  double total_power, lf, hf, vlf, lf_hf, lf_norm, hf_norm;
};

inline constexpr double kZeroPower = 1e-10;

// Tachogram sample i sits at beat_times[i + 1], the beat closing interval i.
inline Psd nni_psd(std::span<const double> nni, std::span<const double> beat_times, const FrequencyConfig& cfg = {}) {
  if (nni.size() < 2) throw InputError("frequency-domain HRV needs at least 2 NNIs");
  if (beat_times.size() != nni.size() + 1) throw InputError("beat_times must have nni.size() + 1 entries");
  auto t = beat_times.subspan(1);
  if (t.back() - t.front() < 60'000.0) throw InputError("frequency-domain HRV needs >= 60 s of NNIs");
  auto grid = resample_uniform(t, nni, cfg.resample_hz);
  double m = 0.0;
  for (double v : grid) m += v;
  m /= static_cast<double>(grid.size());
  for (double& v : grid) v -= m;
  return welch(grid, cfg.resample_hz, cfg.segment_len);
}

inline FrequencyDomain frequency_domain(std::span<const double> nni, std::span<const double> beat_times,
                                        const FrequencyConfig& cfg = {}) {
  const Psd psd = nni_psd(nni, beat_times, cfg);
  FrequencyDomain f{};
  f.vlf = band_power(psd, cfg.vlf_lo, cfg.vlf_hi);
  f.lf = band_power(psd, cfg.lf_lo, cfg.lf_hi);
  f.hf = band_power(psd, cfg.hf_lo, cfg.hf_hi);
  f.total_power = f.vlf + f.lf + f.hf;
  f.lf_hf = f.hf > kZeroPower ? f.lf / f.hf : kMissing;
  f.lf_norm = f.total_power > kZeroPower ? f.lf / f.total_power : kMissing;
  f.hf_norm = f.total_power > kZeroPower ? f.hf / f.total_power : kMissing;
  return f;
}

// ---------------------------------------------------------------------------
// Non-linear (Poincare) domain

struct NonlinearDomain {
  double csi, csi_mod, sd1, sd2, sd1_sd2, cvi;
};

inline NonlinearDomain nonlinear_domain(std::span<const double> nni) {
  if (nni.size() < 3) throw InputError("non-linear HRV needs at least 3 NNIs");
  std::vector<double> diff(nni.size() - 1);
  for (std::size_t i = 0; i + 1 < nni.size(); ++i) diff[i] = nni[i + 1] - nni[i];
  const double sdsd = population_std(diff);
  const double sdnn = population_std(nni);
  NonlinearDomain d{};
  d.sd1 = std::sqrt(0.5) * sdsd;
  d.sd2 = std::sqrt(std::max(0.0, 2.0 * sdnn * sdnn - 0.5 * sdsd * sdsd));
  d.sd1_sd2 = d.sd2 > 0.0 ? d.sd1 / d.sd2 : kMissing;
  d.csi = d.sd1 > 0.0 ? d.sd2 / d.sd1 : kMissing;
  d.csi_mod = d.sd1 > 0.0 ? d.sd2 * d.sd2 / d.sd1 : kMissing;
  const double prod = 16.0 * d.sd1 * d.sd2;
  d.cvi = prod > 0.0 ? std::log10(prod) : kMissing;
  return d;
}

// ---------------------------------------------------------------------------
// Geometrical domain

inline constexpr double kHistogramBinMs = 7.8125;  // 1/128 s

inline double triangular_index(std::span<const double> nni) {
  if (nni.size() < 2) throw InputError("triangular index needs at least 2 NNIs");
  std::map<long, std::size_t> bins;
  std::size_t peak = 0;
  for (double v : nni) peak = std::max(peak, ++bins[static_cast<long>(std::floor(v / kHistogramBinMs))]);
  return static_cast<double>(nni.size()) / static_cast<double>(peak);
}

// ---------------------------------------------------------------------------

inline HrvVector hrv_features(std::span<const double> nni, std::span<const double> beat_times,
                              const FrequencyConfig& cfg = {}) {
  const auto t = time_domain(nni);
  const auto f = frequency_domain(nni, beat_times, cfg);
  const auto p = nonlinear_domain(nni);
  return {t.min_hr, t.max_hr, t.mean_hr, t.std_hr, t.sdsd, t.sdnn, t.nn_mean, t.nn20,
          t.nn50,   t.pnn50,  t.pnn20,   t.rmssd,  t.median_nn, t.range_nn, t.cvsd, t.cv_nni,
          f.total_power, f.lf, f.hf, f.vlf, f.lf_hf, f.lf_norm, f.hf_norm,
          p.csi, p.csi_mod, p.sd1, p.sd2, p.sd1_sd2, p.cvi,
          triangular_index(nni)};
}

inline HrvVector hrv_features(const ecg::NniWindow& window, const FrequencyConfig& cfg = {}) {
  if (!window.valid) throw InputError("HRV features requested for an invalid window");
  return hrv_features(window.nni, window.beat_times, cfg);
}

}  // namespace fatigue::hrv
