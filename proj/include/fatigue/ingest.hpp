#pragma once

// Raw-stream ingestion: ECG and 30 s actigraphy-count CSVs, fatigue labels,
// and the mapping from timestamps to the four daily period segments.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fatigue/common.hpp"

namespace fatigue {

using TimeMs = std::int64_t;  // UTC milliseconds since the Unix epoch

inline constexpr TimeMs kEpochMs = 30'000;
inline constexpr TimeMs kHourMs = 3'600'000;
inline constexpr TimeMs kDayMs = 24 * kHourMs;

enum class Period { morning, afternoon, evening, night };

inline constexpr Period kAllPeriods[] = {Period::night, Period::morning, Period::afternoon,
                                         Period::evening};

inline std::string_view period_name(Period p) {
  switch (p) {
    case Period::morning: return "morning";
    case Period::afternoon: return "afternoon";
    case Period::evening: return "evening";
    case Period::night: return "night";
  }
  return "?";
}

inline std::optional<Period> parse_period(std::string_view s) {
  for (Period p : kAllPeriods)
    if (period_name(p) == s) return p;
  return std::nullopt;
}

// Local start hour of each period; every period is 6 h long.
inline int period_start_hour(Period p) {
  switch (p) {
    case Period::night: return 0;
    case Period::morning: return 6;
    case Period::afternoon: return 12;
    case Period::evening: return 18;
  }
  return 0;
}

using Date = std::chrono::year_month_day;

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) || !parse_int(s.substr(8, 2), d))
    return std::nullopt;
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

struct SegmentKey {
  std::string subject_id;
  Date date;
  Period period = Period::morning;

  auto tie() const {
    return std::tuple(subject_id, static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                      static_cast<unsigned>(date.day()), period_start_hour(period));
  }
  friend bool operator<(const SegmentKey& a, const SegmentKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const SegmentKey& a, const SegmentKey& b) { return a.tie() == b.tie(); }

  std::string str() const {
    return subject_id + "_" + format_date(date) + "_" + std::string(period_name(period));
  }
};

struct PeriodSlot {
  Date date;
  Period period;
};

// Maps a UTC timestamp to the local calendar date and period. Night
// (00:00-06:00) belongs to the calendar date of its local time.
inline PeriodSlot assign_period(TimeMs utc_ms, int tz_offset_min) {
  using namespace std::chrono;
  const TimeMs local = utc_ms + static_cast<TimeMs>(tz_offset_min) * 60'000;
  const sys_time<milliseconds> tp{milliseconds{local}};
  const auto day = floor<days>(tp);
  const auto ms_of_day = (tp - day).count();
  const int hour = static_cast<int>(ms_of_day / kHourMs);
  Period p = Period::night;
  if (hour >= 18) p = Period::evening;
  else if (hour >= 12) p = Period::afternoon;
  else if (hour >= 6) p = Period::morning;
  return {year_month_day{day}, p};
}

struct SegmentBounds {
  TimeMs start_ms = 0;
  TimeMs end_ms = 0;
};

// UTC bounds [start, end) of a period segment.
inline SegmentBounds segment_bounds(const Date& date, Period p, int tz_offset_min) {
  using namespace std::chrono;
  const TimeMs local_midnight = duration_cast<milliseconds>(sys_days{date}.time_since_epoch()).count();
  const TimeMs start = local_midnight + period_start_hour(p) * kHourMs -
                       static_cast<TimeMs>(tz_offset_min) * 60'000;
  return {start, start + 6 * kHourMs};
}

// ---------------------------------------------------------------------------
// Records

struct EcgRecord {
  std::string subject_id;
  TimeMs start_time_ms = 0;
  int sample_rate_hz = 0;
  std::vector<double> samples;  // mV

  TimeMs end_time_ms() const {
    return start_time_ms +
           static_cast<TimeMs>(static_cast<double>(samples.size()) * 1000.0 / sample_rate_hz);
  }
  double sample_time_ms(std::size_t i) const {
    return static_cast<double>(start_time_ms) + static_cast<double>(i) * 1000.0 / sample_rate_hz;
  }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct CountsRecord {
  std::string subject_id;
  std::vector<TimeMs> epoch_start_ms;
  std::vector<std::int64_t> counts;
};

struct FatigueLabel {
  std::string subject_id;
  Date date;
  Period period = Period::morning;
  int score = 0;

  SegmentKey key() const { return {subject_id, date, period}; }
};

inline void validate(const EcgRecord& r) {
  if (r.sample_rate_hz < 100) throw DataError("ECG sample rate must be >= 100 Hz");
  if (r.samples.empty()) throw DataError("ECG record has no samples");
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    if (!std::isfinite(r.samples[i])) throw DataError("non-finite ECG sample", static_cast<long>(i + 1));
}

inline void validate(const CountsRecord& r) {
  if (r.epoch_start_ms.size() != r.counts.size()) throw DataError("counts/timestamps length mismatch");
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    if (r.counts[i] < 0) throw DataError("negative count", static_cast<long>(i + 1));
    if (i > 0 && r.epoch_start_ms[i] - r.epoch_start_ms[i - 1] != kEpochMs)
      throw DataError("epoch spacing must be exactly 30000 ms", static_cast<long>(i + 1));
  }
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

inline void expect_header(std::istream& in, std::string_view expected, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) throw ParseError(path + ": expected header '" + std::string(expected) + "'");
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace detail

// Header row, then one metadata row, then one voltage per row. Row numbers in
// errors count sample rows from 1.
inline EcgRecord read_ecg_csv(const std::string& path) {
  auto in = detail::open_input(path);
  detail::expect_header(in, "subject_id,start_time_ms,sample_rate_hz", path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing metadata row");
  auto meta = split_csv_line(line);
  EcgRecord r;
  if (meta.size() != 3 || meta[0].empty() || !parse_int(meta[1], r.start_time_ms) ||
      !parse_int(meta[2], r.sample_rate_hz))
    throw ParseError(path + ": malformed metadata row");
  r.subject_id = std::string(meta[0]);
  if (r.sample_rate_hz < 100) throw DataError("ECG sample rate must be >= 100 Hz");
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    double v = 0.0;
    if (!parse_double(line, v)) {
      // from_chars accepts nan/inf spellings, so anything left here is garbage
      throw ParseError(path + ": unparseable sample at row " + std::to_string(row));
    }
    if (!std::isfinite(v)) throw DataError("non-finite ECG sample", row);
    r.samples.push_back(v);
  }
  if (r.samples.empty()) throw DataError("ECG record has no samples");
  return r;
}

inline void write_ecg_csv(const EcgRecord& r, const std::string& path) {
  auto out = detail::open_output(path);
  out << "subject_id,start_time_ms,sample_rate_hz\n"
      << r.subject_id << ',' << r.start_time_ms << ',' << r.sample_rate_hz << '\n';
  std::string buf;
  buf.reserve(r.samples.size() * 8);
  for (double v : r.samples) {
    buf += format_double(v);
    buf += '\n';
  }
  out << buf;
}

inline CountsRecord read_counts_csv(const std::string& path) {
  auto in = detail::open_input(path);
  detail::expect_header(in, "subject_id,epoch_start_ms,counts", path);
  CountsRecord r;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto f = split_csv_line(line);
    TimeMs t = 0;
    std::int64_t c = 0;
    if (f.size() != 3 || !parse_int(f[1], t) || !parse_int(f[2], c))
      throw ParseError(path + ": malformed row " + std::to_string(row));
    if (r.subject_id.empty()) r.subject_id = std::string(f[0]);
    else if (r.subject_id != f[0]) throw DataError("mixed subject ids in counts file", row);
    if (c < 0) throw DataError("negative count", row);
    if (!r.epoch_start_ms.empty() && t - r.epoch_start_ms.back() != kEpochMs)
      throw DataError("epoch spacing must be exactly 30000 ms", row);
    r.epoch_start_ms.push_back(t);
    r.counts.push_back(c);
  }
  if (r.counts.empty()) throw DataError("counts record has no epochs");
  return r;
}

inline void write_counts_csv(const CountsRecord& r, const std::string& path) {
  auto out = detail::open_output(path);
  out << "subject_id,epoch_start_ms,counts\n";
  for (std::size_t i = 0; i < r.counts.size(); ++i)
    out << r.subject_id << ',' << r.epoch_start_ms[i] << ',' << r.counts[i] << '\n';
}

inline std::vector<FatigueLabel> read_labels_csv(const std::string& path) {
  auto in = detail::open_input(path);
  detail::expect_header(in, "subject_id,date,period,score", path);
  std::vector<FatigueLabel> labels;
  std::set<SegmentKey> seen;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto f = split_csv_line(line);
    if (f.size() != 4 || f[0].empty()) throw ParseError(path + ": malformed row " + std::to_string(row));
    auto date = parse_date(f[1]);
    auto period = parse_period(f[2]);
    int score = 0;
    if (!date || !period || !parse_int(f[3], score))
      throw ParseError(path + ": malformed row " + std::to_string(row));
    if (score < 0 || score > 10) throw DataError("fatigue score outside 0-10", row);
    FatigueLabel lab{std::string(f[0]), *date, *period, score};
    if (!seen.insert(lab.key()).second) throw DataError("duplicate label " + lab.key().str(), row);
    labels.push_back(std::move(lab));
  }
  return labels;
}

inline void write_labels_csv(const std::vector<FatigueLabel>& labels, const std::string& path) {
  auto out = detail::open_output(path);
  out << "subject_id,date,period,score\n";
  for (const auto& l : labels)
    out << l.subject_id << ',' << format_date(l.date) << ',' << period_name(l.period) << ','
        << l.score << '\n';
}

}  // namespace fatigue
