#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "fatigue/ecg.hpp"
#include "fatigue/synth.hpp"

using namespace fatigue;

namespace {

// Fraction of true beats with a detection within tol_ms (greedy one-to-one).
double match_rate(const std::vector<double>& truth, const std::vector<double>& det, double tol_ms,
                  double* worst = nullptr) {
  std::size_t j = 0, hit = 0;
  double w = 0;
  for (double t : truth) {
    while (j < det.size() && det[j] < t - tol_ms) ++j;
    if (j < det.size() && std::abs(det[j] - t) <= tol_ms) {
      w = std::max(w, std::abs(det[j] - t));
      ++hit, ++j;
    }
  }
  if (worst) *worst = w;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

TEST(DetectRPeaks, CleanSignalMatchesEveryBeat) {
  synth::SynthEcgSpec s;
  s.duration_s = 60;
  s.sample_rate_hz = 250;
  const auto e = synth::gen_ecg(s);
  const auto det = ecg::detect_r_peaks(e.record);
  ASSERT_EQ(det.size(), e.true_beat_times_ms.size());
  double worst = 0;
  EXPECT_DOUBLE_EQ(match_rate(e.true_beat_times_ms, det, 20.0, &worst), 1.0);
  EXPECT_LT(worst, 20.0);
}

TEST(DetectRPeaks, FlatSignalHasNoBeats) {
  EcgRecord r{"x", 0, 250, std::vector<double>(250 * 20, 0.0)};
  EXPECT_TRUE(ecg::detect_r_peaks(r).empty());
}

TEST(DetectRPeaks, TooShortIsInputError) {
  EcgRecord r{"x", 0, 250, std::vector<double>(250 * 9, 0.0)};
  EXPECT_THROW(ecg::detect_r_peaks(r), InputError);
}

TEST(DetectRPeaks, NoisyVariableRateAndRefractory) {
  synth::SynthEcgSpec s;
  s.duration_s = 120;
  s.sample_rate_hz = 100;
  s.mean_hr_bpm = 95;
  s.noise_std_mv = 0.05;
  s.hrv_modulations = {{0.25, 25}, {0.08, 20}};
  s.seed = 5;
  const auto e = synth::gen_ecg(s);
  const auto det = ecg::detect_r_peaks(e.record);
  EXPECT_GE(match_rate(e.true_beat_times_ms, det, 20.0), 0.99);
  for (std::size_t i = 1; i < det.size(); ++i) EXPECT_GE(det[i] - det[i - 1], 200.0);
}

TEST(ComputeRri, Differences) {
  const auto r = ecg::compute_rri(std::vector<double>{0, 800, 1650});
  EXPECT_EQ(r.intervals, (std::vector<double>{800, 850}));
  EXPECT_THROW(ecg::compute_rri(std::vector<double>{5}), InputError);
  const auto eq = ecg::compute_rri(std::vector<double>{0, 1000, 2000, 3000, 4000});
  EXPECT_EQ(eq.intervals, std::vector<double>(4, 1000.0));
}

TEST(CleanRri, RangeOutlierInterpolated) {
  const auto c = ecg::clean_rri(std::vector<double>{800, 2500, 820});
  EXPECT_EQ(c.nni, (std::vector<double>{800, 810, 820}));
  EXPECT_EQ(c.corrected_mask, (std::vector<bool>{false, true, false}));
}

TEST(CleanRri, JumpRuleUsesPreviousRetained) {
  // 1000 jumps 25% from 800; 990 is then judged against 800 (23.75%) and is
  // also removed; both tail positions take the nearest retained value.
  const auto c = ecg::clean_rri(std::vector<double>{800, 1000, 990});
  EXPECT_EQ(c.nni, (std::vector<double>{800, 800, 800}));
  EXPECT_EQ(c.corrected_mask, (std::vector<bool>{false, true, true}));
}

TEST(CleanRri, CleanSeriesUnchanged) {
  const auto c = ecg::clean_rri(std::vector<double>{800, 800, 800});
  EXPECT_EQ(c.nni, (std::vector<double>{800, 800, 800}));
  EXPECT_EQ(c.corrected_mask, std::vector<bool>(3, false));
}

TEST(CleanRri, SingleEctopicDoesNotCascade) {
  const auto c = ecg::clean_rri(std::vector<double>{800, 810, 400, 1200, 805, 800});
  EXPECT_EQ(c.corrected_mask, (std::vector<bool>{false, false, true, true, false, false}));
  EXPECT_NEAR(c.nni[2], 810 + (805 - 810) / 3.0, 1e-12);
  EXPECT_NEAR(c.nni[3], 810 + 2 * (805 - 810) / 3.0, 1e-12);
}

TEST(CleanRri, LeadingRemovalFilledByNearest) {
  const auto c = ecg::clean_rri(std::vector<double>{250, 800, 810});
  EXPECT_EQ(c.nni, (std::vector<double>{800, 800, 810}));
  EXPECT_EQ(c.corrected_mask, (std::vector<bool>{true, false, false}));
}

TEST(CleanRri, AllRemovedIsQualityError) {
  EXPECT_THROW(ecg::clean_rri(std::vector<double>{100, 2500, 3000}), QualityError);
}

TEST(CleanRri, IdempotentAndInRange) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jitter(0, 30);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rr(300);
    for (auto& v : rr) {
      v = 800 + jitter(rng);
      if (u(rng) < 0.05) v = u(rng) < 0.5 ? 250 + 200 * u(rng) : 1100 + 1500 * u(rng);
    }
    ecg::CleanedRri once;
    try {
      once = ecg::clean_rri(rr);
    } catch (const QualityError&) {
      continue;
    }
    for (double v : once.nni) {
      EXPECT_GE(v, 300.0);
      EXPECT_LE(v, 2000.0);
    }
    const auto twice = ecg::clean_rri(once.nni);
    EXPECT_EQ(twice.nni, once.nni);
    EXPECT_EQ(std::count(twice.corrected_mask.begin(), twice.corrected_mask.end(), true), 0);
  }
}

TEST(AssessQuality, Thresholds) {
  ecg::QualityReport ok{300.0, 0.0, 375};
  EXPECT_TRUE(ecg::assess_quality(ok).valid);
  EXPECT_FALSE(ecg::assess_quality(ecg::QualityReport{300.0, 0.25, 375}).valid);
  EXPECT_FALSE(ecg::assess_quality(ecg::QualityReport{200.0, 0.0, 375}).valid);
  EXPECT_FALSE(ecg::assess_quality(ecg::QualityReport{300.0, 0.0, 99}).valid);
}

TEST(AssessQuality, ConstantWindow) {
  const std::vector<double> nni(375, 800.0);
  const auto q = ecg::quality_of(nni, std::vector<bool>(375, false));
  EXPECT_DOUBLE_EQ(q.coverage_s, 300.0);
  EXPECT_DOUBLE_EQ(q.corrected_fraction, 0.0);
  EXPECT_EQ(q.nni_count, 375u);
  EXPECT_TRUE(ecg::assess_quality(q).valid);
}

namespace {
EcgRecord synth_record(double minutes) {
  synth::SynthEcgSpec s;
  s.duration_s = minutes * 60;
  s.sample_rate_hz = 100;
  s.noise_std_mv = 0.02;
  s.seed = 11;
  return synth::gen_ecg(s).record;
}
}  // namespace

TEST(WindowEcg, WindowCounts) {
  const auto ten = synth_record(10);
  EXPECT_EQ(ecg::window_ecg(ten, {0, 6 * kHourMs}).size(), 2u);
  const auto four = synth_record(4);
  EXPECT_TRUE(ecg::window_ecg(four, {0, 6 * kHourMs}).empty());
}

TEST(WindowEcg, FullSegmentGives72Windows) {
  // Sparse synthetic: a flat 6 h record is enough to count windows.
  EcgRecord r{"x", 0, 100, std::vector<double>(6 * 3600 * 100, 0.0)};
  const auto w = ecg::window_ecg(r, {0, 6 * kHourMs});
  ASSERT_EQ(w.size(), 72u);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].window_start, static_cast<TimeMs>(i) * 300'000);
    EXPECT_FALSE(w[i].valid);
  }
}

TEST(WindowEcg, CleanWindowsAreValidAndAligned) {
  const auto rec = synth_record(15);
  const auto w = ecg::window_ecg(rec, {0, 6 * kHourMs});
  ASSERT_EQ(w.size(), 3u);
  for (const auto& win : w) {
    EXPECT_TRUE(win.valid);
    EXPECT_EQ(win.nni.size(), win.corrected_mask.size());
    EXPECT_EQ(win.beat_times.size(), win.nni.size() + 1);
    EXPECT_LE(win.quality.coverage_s, 300.0);
    for (double v : win.nni) EXPECT_NEAR(v, 800.0, 20.0);
  }
}
