#pragma once

// Synthetic ECG, actigraphy counts and fatigue labels with known ground truth.
// Everything here is deterministic given the seed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fatigue/common.hpp"
#include "fatigue/ingest.hpp"

namespace fatigue::synth {

struct Modulation {
  double frequency_hz = 0.0;
  double amplitude_ms = 0.0;
};

struct SynthEcgSpec {
  std::string subject_id = "synth";
  TimeMs start_time_ms = 0;
  double duration_s = 60.0;
  int sample_rate_hz = 250;
  double mean_hr_bpm = 75.0;
  std::vector<Modulation> hrv_modulations;
  double noise_std_mv = 0.0;
  double first_beat_ms = 250.0;  // offset of the first beat from start_time
  bool quantize_uv = true;       // round samples to 1 uV like an ADC
  std::uint64_t seed = 0;
};

struct SynthEcg {
  EcgRecord record;
  std::vector<double> true_beat_times_ms;  // absolute UTC ms
};

inline constexpr double kTemplateHalfWidthMs = 60.0;

// Three-lobe QRS-like template, 120 ms support, R peak of 1 mV at tau = 0.
inline double qrs_template(double tau_ms) {
  if (std::abs(tau_ms) > kTemplateHalfWidthMs) return 0.0;
  auto lobe = [](double t, double centre, double width, double amp) {
    const double z = (t - centre) / width;
    return amp * std::exp(-0.5 * z * z);
  };
  return lobe(tau_ms, -28.0, 7.0, -0.12) + lobe(tau_ms, 0.0, 9.0, 1.0) + lobe(tau_ms, 28.0, 7.0, -0.25);
}

inline void check_spec(const SynthEcgSpec& s) {
  if (!(s.mean_hr_bpm >= 30.0 && s.mean_hr_bpm <= 220.0)) throw SpecError("mean_hr must be in [30, 220] bpm");
  if (s.sample_rate_hz < 100) throw SpecError("sample_rate must be >= 100 Hz");
  if (!(s.duration_s > 0.0)) throw SpecError("duration must be positive");
  if (s.noise_std_mv < 0.0) throw SpecError("noise_std must be non-negative");
  const double base = 60000.0 / s.mean_hr_bpm;
  double swing = 0.0;
  for (const auto& m : s.hrv_modulations) swing += std::abs(m.amplitude_ms);
  if (!(base - swing > 300.0 && base + swing < 2000.0))
    throw SpecError("modulation amplitudes push intervals outside (300, 2000) ms");
}

// Beat times follow t[i+1] = t[i] + RR(t[i]) with
// RR(t) = 60000/mean_hr + sum_k A_k sin(2 pi f_k t).
inline SynthEcg gen_ecg(const SynthEcgSpec& spec) {
  check_spec(spec);
  const double base = 60000.0 / spec.mean_hr_bpm;
  const double duration_ms = spec.duration_s * 1000.0;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));

  std::vector<double> beats_rel;
  for (double t = spec.first_beat_ms; t < duration_ms;) {
    beats_rel.push_back(t);
    double rr = base;
    for (const auto& m : spec.hrv_modulations)
      rr += m.amplitude_ms * std::sin(2.0 * std::numbers::pi * m.frequency_hz * t / 1000.0);
    t += rr;
  }

  SynthEcg out;
  out.record.subject_id = spec.subject_id;
  out.record.start_time_ms = spec.start_time_ms;
  out.record.sample_rate_hz = spec.sample_rate_hz;
  out.record.samples.assign(n, 0.0);
  const double fs = spec.sample_rate_hz;
  for (double b : beats_rel) {
    const auto lo = static_cast<long>(std::ceil((b - kTemplateHalfWidthMs) * fs / 1000.0));
    const auto hi = static_cast<long>(std::floor((b + kTemplateHalfWidthMs) * fs / 1000.0));
    for (long i = std::max(0L, lo); i <= hi && i < static_cast<long>(n); ++i)
      out.record.samples[static_cast<std::size_t>(i)] += qrs_template(static_cast<double>(i) * 1000.0 / fs - b);
  }
  if (spec.noise_std_mv > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std_mv);
    for (double& v : out.record.samples) v += noise(rng);
  }
  if (spec.quantize_uv)
    for (double& v : out.record.samples) v = std::round(v * 1000.0) / 1000.0;

  out.true_beat_times_ms.reserve(beats_rel.size());
  for (double b : beats_rel) out.true_beat_times_ms.push_back(static_cast<double>(spec.start_time_ms) + b);
  return out;
}

struct ActivityPiece {
  double start_s = 0.0;
  double end_s = 0.0;
  double intensity = 0.0;  // expected counts per 30 s epoch
};

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
};

// Poisson counts per epoch with piecewise-constant mean; epochs whose start
// falls inside a non-wear interval are exactly zero.
inline CountsRecord gen_counts(double duration_s, const std::vector<ActivityPiece>& profile,
                               std::vector<Interval> nonwear, std::uint64_t seed,
                               TimeMs start_ms = 0, const std::string& subject_id = "synth") {
  std::sort(nonwear.begin(), nonwear.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 0; i < nonwear.size(); ++i) {
    if (nonwear[i].start_s < 0.0 || nonwear[i].end_s > duration_s || nonwear[i].end_s < nonwear[i].start_s)
      throw SpecError("non-wear interval outside the recording");
    if (i > 0 && nonwear[i].start_s < nonwear[i - 1].end_s) throw SpecError("overlapping non-wear intervals");
  }
  const auto n = static_cast<std::size_t>(std::floor(duration_s / 30.0));
  CountsRecord r;
  r.subject_id = subject_id;
  r.epoch_start_ms.resize(n);
  r.counts.resize(n);
  std::mt19937_64 rng(seed);
  for (std::size_t e = 0; e < n; ++e) {
    const double t = 30.0 * static_cast<double>(e);
    r.epoch_start_ms[e] = start_ms + static_cast<TimeMs>(e) * kEpochMs;
    double lambda = 0.0;
    for (const auto& p : profile)
      if (t >= p.start_s && t < p.end_s) lambda = p.intensity;
    // draw unconditionally so the stream does not depend on the non-wear layout
    std::int64_t c = 0;
    if (lambda > 0.0) c = std::poisson_distribution<std::int64_t>(lambda)(rng);
    for (const auto& iv : nonwear)
      if (t >= iv.start_s && t < iv.end_s) c = 0;
    r.counts[e] = c;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Cohorts

enum class LabelRule { linear_hr, linear_activity, mixed };

inline std::string_view rule_name(LabelRule r) {
  switch (r) {
    case LabelRule::linear_hr: return "linear_hr";
    case LabelRule::linear_activity: return "linear_activity";
    case LabelRule::mixed: return "mixed";
  }
  return "?";
}

inline std::optional<LabelRule> parse_rule(std::string_view s) {
  for (auto r : {LabelRule::linear_hr, LabelRule::linear_activity, LabelRule::mixed})
    if (rule_name(r) == s) return r;
  return std::nullopt;
}

struct SynthCohortSpec {
  int n_subjects = 9;
  int days = 7;
  LabelRule label_rule = LabelRule::linear_hr;
  // score = intercept + hr_coef * period_mean_hr + activity_coef * period_activity
  double intercept = -12.0;
  double hr_coef = 0.2;
  double activity_coef = 0.0;
  double noise_std = 0.5;
  std::uint64_t seed = 1;

  Date start_date{std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{6}};
  int tz_offset_min = 0;
  int sample_rate_hz = 100;
  double ecg_minutes_per_period = 120.0;
  double ecg_noise_std_mv = 0.02;
  double hr_min_bpm = 60.0;
  double hr_max_bpm = 110.0;
  double activity_min = 20.0;  // counts per epoch
  double activity_max = 300.0;
  std::vector<Modulation> hrv_modulations{{0.25, 20.0}, {0.1, 15.0}};

  // Coefficients mapping the latent ranges onto roughly 0-10.
  void use_default_coefficients() {
    const double hr_slope = 10.0 / (hr_max_bpm - hr_min_bpm);
    const double act_slope = 10.0 / (activity_max - activity_min);
    switch (label_rule) {
      case LabelRule::linear_hr:
        hr_coef = hr_slope, activity_coef = 0.0, intercept = -hr_slope * hr_min_bpm;
        break;
      case LabelRule::linear_activity:
        hr_coef = 0.0, activity_coef = act_slope, intercept = -act_slope * activity_min;
        break;
      case LabelRule::mixed:
        hr_coef = 0.5 * hr_slope, activity_coef = 0.5 * act_slope;
        intercept = -0.5 * (hr_slope * hr_min_bpm + act_slope * activity_min);
        break;
    }
  }
};

struct SegmentPlan {
  SegmentKey key;
  SegmentBounds bounds;
  double mean_hr_bpm = 0.0;
  double activity = 0.0;
  double noiseless_score = 0.0;
  int score = 0;
  std::uint64_t ecg_seed = 0;
};

struct CohortPlan {
  SynthCohortSpec spec;
  std::vector<std::string> subjects;
  std::vector<SegmentPlan> segments;  // subject-major, then date, then period (night first)
  std::vector<FatigueLabel> labels;
};

inline std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", i + 1);
  return buf;
}

// Draws latents and labels for every subject-day-period. Signals are rendered
// lazily by segment_ecg / subject_counts so large cohorts never sit in memory.
inline CohortPlan plan_cohort(const SynthCohortSpec& spec) {
  if (spec.n_subjects < 1 || spec.days < 1) throw SpecError("cohort needs >= 1 subject and >= 1 day");
  if (spec.ecg_minutes_per_period <= 0.0 || spec.ecg_minutes_per_period > 360.0)
    throw SpecError("ecg_minutes_per_period must be in (0, 360]");
  CohortPlan plan;
  plan.spec = spec;
  std::mt19937_64 rng(derive_seed(spec.seed, 0));
  std::uniform_real_distribution<double> hr(spec.hr_min_bpm, spec.hr_max_bpm);
  std::uniform_real_distribution<double> act(spec.activity_min, spec.activity_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int s = 0; s < spec.n_subjects; ++s) {
    plan.subjects.push_back(subject_name(s));
    for (int d = 0; d < spec.days; ++d) {
      const Date date{std::chrono::sys_days{spec.start_date} + std::chrono::days{d}};
      for (Period p : kAllPeriods) {
        SegmentPlan seg;
        seg.key = {plan.subjects.back(), date, p};
        seg.bounds = segment_bounds(date, p, spec.tz_offset_min);
        seg.mean_hr_bpm = hr(rng);
        seg.activity = act(rng);
        seg.noiseless_score = spec.intercept + spec.hr_coef * seg.mean_hr_bpm + spec.activity_coef * seg.activity;
        const double noisy = seg.noiseless_score + spec.noise_std * noise(rng);
        seg.score = static_cast<int>(std::clamp(std::round(noisy), 0.0, 10.0));
        seg.ecg_seed = derive_seed(spec.seed, 1000 + plan.segments.size());
        plan.labels.push_back({seg.key.subject_id, date, p, seg.score});
        plan.segments.push_back(seg);
      }
    }
  }
  return plan;
}

inline SynthEcg segment_ecg(const CohortPlan& plan, const SegmentPlan& seg) {
  SynthEcgSpec e;
  e.subject_id = seg.key.subject_id;
  e.start_time_ms = seg.bounds.start_ms;
  e.duration_s = plan.spec.ecg_minutes_per_period * 60.0;
  e.sample_rate_hz = plan.spec.sample_rate_hz;
  e.mean_hr_bpm = seg.mean_hr_bpm;
  e.hrv_modulations = plan.spec.hrv_modulations;
  e.noise_std_mv = plan.spec.ecg_noise_std_mv;
  e.seed = seg.ecg_seed;
  return gen_ecg(e);
}

// One continuous counts record per subject spanning all cohort days.
inline CountsRecord subject_counts(const CohortPlan& plan, std::size_t subject_index) {
  const auto& subject = plan.subjects.at(subject_index);
  const TimeMs origin = segment_bounds(plan.spec.start_date, Period::night, plan.spec.tz_offset_min).start_ms;
  std::vector<ActivityPiece> profile;
  for (const auto& seg : plan.segments) {
    if (seg.key.subject_id != subject) continue;
    profile.push_back({static_cast<double>(seg.bounds.start_ms - origin) / 1000.0,
                       static_cast<double>(seg.bounds.end_ms - origin) / 1000.0, seg.activity});
  }
  const double duration_s = static_cast<double>(plan.spec.days) * 86400.0;
  return gen_counts(duration_s, profile, {}, derive_seed(plan.spec.seed, 500 + subject_index), origin, subject);
}

struct CohortFiles {
  std::size_t ecg_files = 0;
  std::size_t counts_files = 0;
  std::size_t labels = 0;
};

// Writes ecg/<segment>.csv, counts/<subject>.csv, labels.csv and
// ground_truth.csv under `dir`.
inline CohortFiles write_cohort(const CohortPlan& plan, const std::filesystem::path& dir,
                                bool with_ecg = true, bool with_counts = true) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  CohortFiles files;
  if (with_ecg) {
    fs::create_directories(dir / "ecg");
    for (const auto& seg : plan.segments) {
      write_ecg_csv(segment_ecg(plan, seg).record, (dir / "ecg" / (seg.key.str() + ".csv")).string());
      ++files.ecg_files;
    }
  }
  if (with_counts) {
    fs::create_directories(dir / "counts");
    for (std::size_t s = 0; s < plan.subjects.size(); ++s) {
      write_counts_csv(subject_counts(plan, s), (dir / "counts" / (plan.subjects[s] + ".csv")).string());
      ++files.counts_files;
    }
  }
  write_labels_csv(plan.labels, (dir / "labels.csv").string());
  files.labels = plan.labels.size();

  auto gt = detail::open_output((dir / "ground_truth.csv").string());
  gt << "subject_id,date,period,mean_hr_bpm,activity_counts_per_epoch,noiseless_score,score\n";
  for (const auto& seg : plan.segments)
    gt << seg.key.subject_id << ',' << format_date(seg.key.date) << ',' << period_name(seg.key.period) << ','
       << format_double(seg.mean_hr_bpm) << ',' << format_double(seg.activity) << ','
       << format_double(seg.noiseless_score) << ',' << seg.score << '\n';
  return files;
}

}  // namespace fatigue::synth
