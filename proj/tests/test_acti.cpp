#include <gtest/gtest.h>

#include "fatigue/acti.hpp"

using namespace fatigue;

namespace {

CountsRecord record(const std::vector<std::int64_t>& counts, TimeMs t0 = 0) {
  CountsRecord r;
  r.subject_id = "s";
  r.counts = counts;
  for (std::size_t i = 0; i < counts.size(); ++i) r.epoch_start_ms.push_back(t0 + static_cast<TimeMs>(i) * kEpochMs);
  return r;
}

std::vector<std::int64_t> active(std::size_t n, std::int64_t v = 300) { return std::vector<std::int64_t>(n, v); }

void append(std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) { a.insert(a.end(), b.begin(), b.end()); }

}  // namespace

TEST(Nonwear, NinetyMinutesOfZeros) {
  auto c = active(40);
  append(c, std::vector<std::int64_t>(180, 0));
  append(c, active(40));
  const auto wear = acti::detect_nonwear(record(c));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(wear[i], i < 40 || i >= 220) << i;
}

TEST(Nonwear, ThirtyMinutesIsWorn) {
  auto c = active(40);
  append(c, std::vector<std::int64_t>(60, 0));
  append(c, active(40));
  for (bool w : acti::detect_nonwear(record(c))) EXPECT_TRUE(w);
}

TEST(Nonwear, SmallSpikeTolerated) {
  // 70 min of zeros with a one-minute (two epoch) interruption of 40 counts/min.
  auto c = active(20);
  append(c, std::vector<std::int64_t>(70, 0));
  append(c, {20, 20});
  append(c, std::vector<std::int64_t>(70, 0));
  append(c, active(20));
  const auto wear = acti::detect_nonwear(record(c));
  for (std::size_t i = 20; i < 162; ++i) EXPECT_FALSE(wear[i]) << i;
  EXPECT_TRUE(wear[19]);
  EXPECT_TRUE(wear[162]);
}

TEST(Nonwear, LongOrStrongInterruptionsSplitTheRun) {
  // Two 35-minute zero runs: a 3-minute interruption is too long, and a
  // 1-minute one at 200 counts/min is too strong; neither run reaches 60 min.
  for (const std::vector<std::int64_t> gap : {std::vector<std::int64_t>(6, 10), std::vector<std::int64_t>{100, 100}}) {
    auto c = active(10);
    append(c, std::vector<std::int64_t>(70, 0));
    append(c, gap);
    append(c, std::vector<std::int64_t>(70, 0));
    append(c, active(10));
    for (bool w : acti::detect_nonwear(record(c))) EXPECT_TRUE(w);
  }
}

TEST(WindowStats, Constant) {
  const std::vector<double> x(10, 100.0);
  const auto f = acti::window_stats(x);
  const acti::ActiVector expected{100, 100, 0, 0, 100, 100, 0, 0};
  EXPECT_EQ(f, expected);
}

TEST(WindowStats, SingleSpike) {
  std::vector<double> x(10, 0.0);
  x[9] = 1000;
  const auto f = acti::window_stats(x);
  EXPECT_DOUBLE_EQ(f[0], 100.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(f[3], 90000.0);
  EXPECT_DOUBLE_EQ(f[2], 300.0);
  EXPECT_DOUBLE_EQ(f[4], 0.0);
  EXPECT_DOUBLE_EQ(f[5], 1000.0);
  // m2 = 9e4, m3 = 7.2e7, m4 = 6.57e10
  EXPECT_NEAR(f[6], 7.2e7 / 2.7e7, 1e-12);
  EXPECT_NEAR(f[7], 6.57e10 / 8.1e9 - 3.0, 1e-12);
  EXPECT_EQ(f[3], f[2] * f[2]);
}

TEST(WindowActi, NonwearEpochInvalidatesWindow) {
  auto c = active(20, 50);
  const auto rec = record(c);
  auto wear = std::vector<bool>(20, true);
  wear[13] = false;
  const auto w = acti::window_acti(rec, wear, {0, 6 * kHourMs});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_TRUE(w[0].wear);
  EXPECT_FALSE(w[1].wear);
  EXPECT_EQ(w[0].epoch_counts.size(), 10u);
  EXPECT_DOUBLE_EQ(w[0].features[0], 50.0);
}

TEST(WindowActi, PartialWindowsSkipped) {
  const auto rec = record(active(25), 0);
  const auto w = acti::window_acti(rec, std::vector<bool>(25, true), {0, 6 * kHourMs});
  EXPECT_EQ(w.size(), 2u);
}
