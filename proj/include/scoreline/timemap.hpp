#pragma once

#include <map>
#include <vector>

#include "scoreline/model.hpp"
#include "scoreline/rational.hpp"

namespace scoreline {

enum class TimeUnit { div, quarter, beat };
enum class BeatMode { slow, fast };

/// Beats per measure-unit for a time signature in the given mode. Fast mode
/// groups compound meters (beats divisible by 3, beat_type 8 or 16) in threes.
Rational beats_per_quarter(const TimeSignature& ts, BeatMode mode);

/// True for compound meters (6/8, 9/8, 12/8, 6/16, ...).
bool is_compound(const TimeSignature& ts);

/// Piecewise-linear maps between divs, quarters and beats for one Part.
///
/// Quarters are anchored at div 0. Beats are anchored at the first downbeat,
/// i.e. the start of the first measure whose span reaches the nominal length of
/// its time signature, so pickup positions come out negative.
class TimeMap {
public:
  explicit TimeMap(const Part& part, BeatMode mode = BeatMode::slow);

  Rational div_to_quarter(const Rational& div) const;
  Rational quarter_to_div(const Rational& quarter) const;
  Rational quarter_to_beat(const Rational& quarter) const;
  Rational beat_to_quarter(const Rational& beat) const;

  Rational convert(const Rational& t, TimeUnit from, TimeUnit to) const;

  bool has_time_signature() const { return !ts_.empty(); }

  /// Div position of the beat origin.
  Time downbeat() const { return downbeat_; }

private:
  struct DivSegment {
    Time div;
    Rational quarter;
    int divs;
  };
  struct BeatSegment {
    Rational quarter;
    Rational beat;  // unshifted integral B(q)
    Rational rate;  // beats per quarter
  };

  Rational raw_beat(const Rational& quarter) const;

  std::vector<DivSegment> divs_;
  std::vector<BeatSegment> ts_;
  Time downbeat_ = 0;
  Rational beat_origin_;
};

/// One-shot conversion. Throws missing-context error when a beat unit is
/// involved and the part has no time signature.
Rational convert_time(const Part& part, const Rational& t, TimeUnit from, TimeUnit to,
                      BeatMode mode = BeatMode::slow);

}  // namespace scoreline
