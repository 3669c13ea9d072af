#pragma once

// Descriptive statistics shared by the acti, highfeat, featselect and evalx
// modules. Population moments throughout.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fatigue/common.hpp"

namespace fatigue::stats {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? kMissing : s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.empty()) return kMissing;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

// Linear interpolation between closest ranks: position q*(n-1) in the sorted
// sample (numpy's default "linear" method).
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return kMissing;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline double percentile(std::span<const double> x, double q) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return percentile_sorted(s, q);
}

inline double median(std::span<const double> x) { return percentile(x, 0.5); }

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;  // central moments, population normalization
  double m3 = 0.0;
  double m4 = 0.0;
};

inline Moments central_moments(std::span<const double> x) {
  Moments m;
  m.mean = mean(x);
  for (double v : x) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  const auto n = static_cast<double>(x.size());
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

// Fisher-Pearson skewness g1 = m3 / m2^1.5; zero-variance input gives 0.
inline double skewness(std::span<const double> x) {
  const Moments m = central_moments(x);
  if (!(m.m2 > 0.0)) return 0.0;
  return m.m3 / std::pow(m.m2, 1.5);
}

// Excess kurtosis m4 / m2^2 - 3; zero-variance input gives 0.
inline double kurtosis(std::span<const double> x) {
  const Moments m = central_moments(x);
  if (!(m.m2 > 0.0)) return 0.0;
  return m.m4 / (m.m2 * m.m2) - 3.0;
}

// Pearson correlation; missing when either input has zero variance.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InputError("pearson: length mismatch or empty");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return kMissing;
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace fatigue::stats
