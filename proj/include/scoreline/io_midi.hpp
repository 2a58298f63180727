#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "scoreline/model.hpp"
#include "scoreline/score_document.hpp"

namespace scoreline {

/// Tempo changes of a MIDI file. There is always an entry at tick 0.
class TempoMap {
public:
  struct Entry {
    std::int64_t tick;
    std::int64_t us_per_quarter;
  };

  explicit TempoMap(int ppq, std::int64_t default_us_per_quarter = 500000);

  /// Later entries at the same tick replace earlier ones.
  void add(std::int64_t tick, std::int64_t us_per_quarter);

  int ppq() const { return ppq_; }
  const std::vector<Entry>& entries() const { return entries_; }

  double tick_to_seconds(std::int64_t tick) const;
  /// Nearest tick; inverse of tick_to_seconds to within one tick.
  std::int64_t seconds_to_tick(double seconds) const;

private:
  int ppq_;
  std::vector<Entry> entries_;
};

struct MidiLoadResult {
  PerformedPart performance;
  std::vector<Warning> warnings;
};

/// Notes, pedal/controls and timing of an SMF type 0/1 file.
MidiLoadResult load_performance_midi(std::string_view bytes);

/// Quantized reading: ticks become divs (divs-per-quarter = ppq), one Part per
/// (track, channel) holding notes. Spelling, voices and a missing key
/// signature are filled in by the analysis estimators.
ScoreDocument load_score_midi(std::string_view bytes, const LoadOptions& options = {});

/// Writes a performance at its ppq under a constant tempo.
void save_midi(const PerformedPart& performance, std::ostream& sink,
               std::int64_t default_tempo_us = 500000);
/// Writes a score (one track per part) at ppq = divs per quarter.
void save_midi(const ScoreDocument& doc, std::ostream& sink, std::int64_t default_tempo_us = 500000);
void save_midi(const Part& part, std::ostream& sink, std::int64_t default_tempo_us = 500000);

std::string save_midi(const PerformedPart& performance, std::int64_t default_tempo_us = 500000);
std::string save_midi(const ScoreDocument& doc, std::int64_t default_tempo_us = 500000);
std::string save_midi(const Part& part, std::int64_t default_tempo_us = 500000);

}  // namespace scoreline
