#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fatigue/hrv.hpp"

using namespace fatigue;

namespace {

// Tachogram of a pure tone: nni_i = base + amp * sin(2 pi f t_i).
void tone(double base, double amp, double f_hz, double seconds, std::vector<double>& nni, std::vector<double>& beats) {
  nni.clear();
  beats = {0.0};
  while (beats.back() < seconds * 1000.0) {
    const double v = base + amp * std::sin(2 * std::numbers::pi * f_hz * beats.back() / 1000.0);
    nni.push_back(v);
    beats.push_back(beats.back() + v);
  }
}

std::vector<double> cumulative(const std::vector<double>& nni) {
  std::vector<double> b{0.0};
  for (double v : nni) b.push_back(b.back() + v);
  return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST(HrvNames, ThirtyInPublishedOrder) {
  EXPECT_EQ(hrv::kHrvNames.size(), 30u);
  EXPECT_EQ(hrv::kHrvNames.front(), "min_hr");
  EXPECT_EQ(hrv::kHrvNames[16], "total_power");
  EXPECT_EQ(hrv::kHrvNames.back(), "triangular_index");
  EXPECT_EQ(hrv::feature_index("sd1"), 25u);
}

TEST(TimeDomain, ConstantSeries) {
  const std::vector<double> nni(375, 800.0);
  const auto t = hrv::time_domain(nni);
  EXPECT_DOUBLE_EQ(t.mean_hr, 75.0);
  EXPECT_EQ(t.sdnn, 0.0);
  EXPECT_EQ(t.rmssd, 0.0);
  EXPECT_EQ(t.nn50, 0.0);
  EXPECT_EQ(t.range_nn, 0.0);
  EXPECT_EQ(t.cvsd, 0.0);
}

TEST(TimeDomain, AlternatingPattern) {
  std::vector<double> nni;
  for (int i = 0; i < 100; ++i) nni.push_back(i % 2 ? 850.0 : 800.0);
  const auto t = hrv::time_domain(nni);
  EXPECT_NEAR(t.rmssd, 50.0, 1e-12);
  // 99 diffs: 50 of +50 and 49 of -50, so the mean diff is 50/99, not 0.
  EXPECT_NEAR(t.sdsd, std::sqrt(2500.0 - std::pow(50.0 / 99.0, 2)), 1e-9);
  EXPECT_NEAR(t.sdsd, 50.0, 0.01);
  EXPECT_EQ(t.nn20, 99.0);
  EXPECT_EQ(t.nn50, 0.0);
  EXPECT_DOUBLE_EQ(t.pnn20, 1.0);
}

TEST(TimeDomain, TwoValues) {
  const auto t = hrv::time_domain(std::vector<double>{600, 900});
  EXPECT_DOUBLE_EQ(t.nn_mean, 750.0);
  EXPECT_DOUBLE_EQ(t.range_nn, 300.0);
  EXPECT_EQ(t.nn50, 1.0);
  EXPECT_DOUBLE_EQ(t.pnn50, 1.0);
  EXPECT_THROW(hrv::time_domain(std::vector<double>{800}), InputError);
}

// Independent single-pass reference (Welford) for every time-domain output.
TEST(TimeDomain, MatchesBruteForceReference) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(2, 400);
  std::uniform_real_distribution<double> base(400, 1500), spread(1, 150);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(rng);
    std::normal_distribution<double> g(base(rng), spread(rng));
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = std::clamp(g(rng), 300.0, 2000.0);

    double m = 0, s = 0, hm = 0, hs = 0, dm = 0, ds = 0, sq = 0, lo = x[0], hi = x[0];
    double hmin = 1e300, hmax = -1e300;
    int c20 = 0, c50 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = i + 1;
      const double d1 = x[i] - m;
      m += d1 / k;
      s += d1 * (x[i] - m);
      const double h = 60000.0 / x[i];
      const double d2 = h - hm;
      hm += d2 / k;
      hs += d2 * (h - hm);
      hmin = std::min(hmin, h), hmax = std::max(hmax, h);
      lo = std::min(lo, x[i]), hi = std::max(hi, x[i]);
      if (i > 0) {
        const double d = x[i] - x[i - 1];
        const double d3 = d - dm;
        dm += d3 / i;
        ds += d3 * (d - dm);
        sq += d * d;
        c20 += std::abs(d) > 20;
        c50 += std::abs(d) > 50;
      }
    }
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;

    const auto t = hrv::time_domain(x);
    const double sdnn = std::sqrt(s / n), rmssd = std::sqrt(sq / (n - 1));
    constexpr double tol = 1e-12;
    EXPECT_LT(rel(t.nn_mean, m), tol);
    EXPECT_LT(rel(t.sdnn, sdnn), 1e-10);  // two-pass vs Welford accumulate differently
    EXPECT_LT(rel(t.mean_hr, hm), tol);
    EXPECT_LT(rel(t.std_hr, std::sqrt(hs / n)), 1e-10);
    EXPECT_EQ(t.min_hr, hmin);
    EXPECT_EQ(t.max_hr, hmax);
    EXPECT_LT(rel(t.rmssd, rmssd), tol);
    EXPECT_EQ(t.nn20, c20);
    EXPECT_EQ(t.nn50, c50);
    EXPECT_LT(rel(t.pnn20, static_cast<double>(c20) / (n - 1)), tol);
    EXPECT_LT(rel(t.pnn50, static_cast<double>(c50) / (n - 1)), tol);
    EXPECT_EQ(t.median_nn, med);
    EXPECT_EQ(t.range_nn, hi - lo);
    EXPECT_LT(rel(t.cvsd, rmssd / m), tol);
    EXPECT_LT(rel(t.cv_nni, sdnn / m), 1e-10);
    if (n > 2) EXPECT_LT(std::abs(t.sdsd - std::sqrt(ds / (n - 1))), 1e-10 * std::max(1.0, t.sdsd));
    EXPECT_LE(t.pnn50, t.pnn20);
  }
}

TEST(FrequencyDomain, ConstantSeriesHasNoPower) {
  const std::vector<double> nni(375, 800.0);
  const auto f = hrv::frequency_domain(nni, cumulative(nni));
  EXPECT_LT(f.vlf, 1e-10);
  EXPECT_LT(f.lf, 1e-10);
  EXPECT_LT(f.hf, 1e-10);
  EXPECT_TRUE(is_missing(f.lf_hf));
  EXPECT_TRUE(is_missing(f.lf_norm));
}

TEST(FrequencyDomain, HfToneDominatesHf) {
  std::vector<double> nni, beats;
  tone(800, 30, 0.25, 300, nni, beats);
  const auto f = hrv::frequency_domain(nni, beats);
  EXPECT_GT(f.hf / (f.lf + f.hf), 0.95);
}

TEST(FrequencyDomain, LfToneDominatesLf) {
  std::vector<double> nni, beats;
  tone(800, 30, 0.1, 300, nni, beats);
  const auto f = hrv::frequency_domain(nni, beats);
  EXPECT_GT(f.lf / (f.lf + f.hf), 0.95);
}

TEST(FrequencyDomain, NormalizedPowersComplete) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 25);
  std::vector<double> nni;
  for (int i = 0; i < 380; ++i) nni.push_back(800 + g(rng));
  const auto f = hrv::frequency_domain(nni, cumulative(nni));
  EXPECT_GE(f.vlf, 0.0);
  EXPECT_GE(f.lf, 0.0);
  EXPECT_GE(f.hf, 0.0);
  EXPECT_NEAR(f.lf_norm + f.hf_norm + f.vlf / f.total_power, 1.0, 1e-9);
  EXPECT_LE(f.lf_norm + f.hf_norm, 1.0 + 1e-12);
}

TEST(FrequencyDomain, ShortSpanRejected) {
  const std::vector<double> nni(50, 800.0);
  EXPECT_THROW(hrv::frequency_domain(nni, cumulative(nni)), InputError);
}

TEST(FrequencyDomain, WelchOfWhiteNoiseIntegratesToVariance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 3);
  std::vector<double> x(4096);
  for (auto& v : x) v = g(rng);
  const auto psd = hrv::welch(x, 4.0, 256);
  double area = 0;
  for (std::size_t k = 1; k < psd.freq_hz.size(); ++k)
    area += 0.5 * (psd.power[k] + psd.power[k - 1]) * (psd.freq_hz[k] - psd.freq_hz[k - 1]);
  EXPECT_NEAR(area, 9.0, 0.9);
}

TEST(Nonlinear, AlternatingSd1) {
  std::vector<double> nni;
  for (int i = 0; i < 100; ++i) nni.push_back(i % 2 ? 850.0 : 800.0);
  const auto p = hrv::nonlinear_domain(nni);
  EXPECT_NEAR(p.sd1, 50.0 / std::sqrt(2.0), 0.01);
}

TEST(Nonlinear, ConstantFlagsMissing) {
  const auto p = hrv::nonlinear_domain(std::vector<double>(20, 800.0));
  EXPECT_EQ(p.sd1, 0.0);
  EXPECT_EQ(p.sd2, 0.0);
  EXPECT_TRUE(is_missing(p.csi));
  EXPECT_TRUE(is_missing(p.csi_mod));
}

TEST(Nonlinear, PoincareIdentity) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(600, 1100);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> nni(50 + trial);
    for (auto& v : nni) v = u(rng);
    const auto p = hrv::nonlinear_domain(nni);
    const double sdnn = hrv::time_domain(nni).sdnn;
    EXPECT_LT(rel(p.sd1 * p.sd1 + p.sd2 * p.sd2, 2 * sdnn * sdnn), 1e-9);
    EXPECT_NEAR(p.csi_mod, p.sd2 * p.sd2 / p.sd1, 1e-9 * p.csi_mod);
    EXPECT_NEAR(p.cvi, std::log10(16 * p.sd1 * p.sd2), 1e-12);
  }
}

TEST(Geometric, TriangularIndex) {
  EXPECT_DOUBLE_EQ(hrv::triangular_index(std::vector<double>(375, 800.0)), 1.0);
  std::vector<double> spread;
  for (int i = 0; i < 100; ++i) spread.push_back(400.0 + 7.8125 * i + 1.0);
  EXPECT_DOUBLE_EQ(hrv::triangular_index(spread), 100.0);
  EXPECT_DOUBLE_EQ(hrv::triangular_index(std::vector<double>{800, 800, 800, 850}), 4.0 / 3.0);
}

TEST(HrvFeatures, ConstantWindowDispersionZero) {
  const std::vector<double> nni(375, 800.0);
  const auto v = hrv::hrv_features(nni, cumulative(nni));
  EXPECT_EQ(v.size(), 30u);
  for (auto name : {"std_hr", "sdsd", "sdnn", "nn20", "nn50", "pnn50", "pnn20", "rmssd", "range_nn", "cvsd", "cv_nni",
                    "sd1", "sd2"})
    EXPECT_EQ(v[hrv::feature_index(name)], 0.0) << name;
}

TEST(HrvFeatures, InvalidWindowRejected) {
  ecg::NniWindow w;
  w.valid = false;
  EXPECT_THROW(hrv::hrv_features(w), InputError);
}
