#include "scoreline/timemap.hpp"

#include <algorithm>

#include "scoreline/errors.hpp"

namespace scoreline {

bool is_compound(const TimeSignature& ts) {
  return ts.beats % 3 == 0 && (ts.beat_type == 8 || ts.beat_type == 16);
}

Rational beats_per_quarter(const TimeSignature& ts, BeatMode mode) {
  Rational rate(ts.beat_type, 4);
  if (mode == BeatMode::fast && is_compound(ts)) rate /= 3;
  return rate;
}

TimeMap::TimeMap(const Part& part, BeatMode mode) {
  Rational q = 0;
  Time prev_div = 0;
  int prev_divs = 0;
  for (const auto& [div, divs] : part.divs_map()) {
    if (!divs_.empty()) q += Rational(div - prev_div, prev_divs);
    divs_.push_back({div, q, divs});
    prev_div = div;
    prev_divs = divs;
  }

  auto signatures = part.objects_of<TimeSignature>();
  for (const auto& ts : signatures) {
    Rational sq = div_to_quarter(ts.start);
    Rational rate = beats_per_quarter(*ts, mode);
    if (!ts_.empty() && ts_.back().quarter == sq) {
      ts_.back().rate = rate;
      continue;
    }
    Rational b = ts_.empty() ? Rational(0) : raw_beat(sq);
    ts_.push_back({sq, b, rate});
  }

  auto in_force = [&](Time t) -> const TimeSignature* {
    const TimeSignature* found = signatures.empty() ? nullptr : signatures.front().value;
    for (const auto& ts : signatures)
      if (ts.start <= t) found = ts.value;
    return found;
  };
  for (const auto& m : part.objects_of<Measure>()) {
    const TimeSignature* ts = in_force(m.start);
    if (!ts) break;
    Rational nominal(4 * ts->beats, ts->beat_type);
    if (div_to_quarter(m.end) - div_to_quarter(m.start) >= nominal) {
      downbeat_ = m.start;
      break;
    }
  }
  beat_origin_ = ts_.empty() ? Rational(0) : raw_beat(div_to_quarter(downbeat_));
}

Rational TimeMap::div_to_quarter(const Rational& div) const {
  auto it = std::upper_bound(divs_.begin(), divs_.end(), div,
                             [](const Rational& d, const DivSegment& s) { return d < Rational(s.div); });
  const DivSegment& seg = it == divs_.begin() ? divs_.front() : *std::prev(it);
  return seg.quarter + (div - seg.div) / Rational(seg.divs);
}

Rational TimeMap::quarter_to_div(const Rational& quarter) const {
  auto it = std::upper_bound(divs_.begin(), divs_.end(), quarter,
                             [](const Rational& q, const DivSegment& s) { return q < s.quarter; });
  const DivSegment& seg = it == divs_.begin() ? divs_.front() : *std::prev(it);
  return Rational(seg.div) + (quarter - seg.quarter) * seg.divs;
}

Rational TimeMap::raw_beat(const Rational& quarter) const {
  auto it = std::upper_bound(ts_.begin(), ts_.end(), quarter,
                             [](const Rational& q, const BeatSegment& s) { return q < s.quarter; });
  const BeatSegment& seg = it == ts_.begin() ? ts_.front() : *std::prev(it);
  return seg.beat + (quarter - seg.quarter) * seg.rate;
}

Rational TimeMap::quarter_to_beat(const Rational& quarter) const {
  if (ts_.empty()) throw Error(ErrorCategory::missing_context, "beat conversion needs a time signature");
  return raw_beat(quarter) - beat_origin_;
}

Rational TimeMap::beat_to_quarter(const Rational& beat) const {
  if (ts_.empty()) throw Error(ErrorCategory::missing_context, "beat conversion needs a time signature");
  Rational raw = beat + beat_origin_;
  auto it = std::upper_bound(ts_.begin(), ts_.end(), raw,
                             [](const Rational& b, const BeatSegment& s) { return b < s.beat; });
  const BeatSegment& seg = it == ts_.begin() ? ts_.front() : *std::prev(it);
  return seg.quarter + (raw - seg.beat) / seg.rate;
}

Rational TimeMap::convert(const Rational& t, TimeUnit from, TimeUnit to) const {
  if (from == to) {
    if ((from == TimeUnit::beat) && ts_.empty())
      throw Error(ErrorCategory::missing_context, "beat conversion needs a time signature");
    return t;
  }
  Rational quarter;
  switch (from) {
    case TimeUnit::div: quarter = div_to_quarter(t); break;
    case TimeUnit::quarter: quarter = t; break;
    case TimeUnit::beat: quarter = beat_to_quarter(t); break;
  }
  switch (to) {
    case TimeUnit::div: return quarter_to_div(quarter);
    case TimeUnit::quarter: return quarter;
    case TimeUnit::beat: return quarter_to_beat(quarter);
  }
  return quarter;
}

Rational convert_time(const Part& part, const Rational& t, TimeUnit from, TimeUnit to, BeatMode mode) {
  return TimeMap(part, mode).convert(t, from, to);
}

}  // namespace scoreline
