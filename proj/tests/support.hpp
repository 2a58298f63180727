#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scoreline/scoreline.hpp"

namespace testing_support {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(SCORELINE_TEST_DATA) / name; }

inline scoreline::ScoreDocument load(const std::string& name) { return scoreline::load_score_file(data(name)); }

inline const scoreline::Part& first_part(const scoreline::ScoreDocument& doc) { return *doc.parts().front(); }

/// Score fixtures that every importer/exporter test iterates over.
inline std::vector<std::string> score_corpus() {
  return {"minimal.musicxml", "seven_quarters.musicxml", "anacrusis.musicxml", "volta.musicxml",
          "dc_al_fine.musicxml", "two_part.musicxml", "divisions_change.musicxml", "scale.krn",
          "two_lines.krn", "simple.mei"};
}

/// A single-part score from (onset, duration, pitch) triples in divs.
struct NoteSpec {
  scoreline::Time onset;
  scoreline::Time duration;
  int pitch;
};

inline scoreline::Part make_part(const std::vector<NoteSpec>& notes, int divs = 1,
                                 std::optional<scoreline::TimeSignature> ts = scoreline::TimeSignature{4, 4}) {
  using namespace scoreline;
  Part part("P1", "", divs);
  if (ts) part.add_object(*ts, 0, 0);
  int k = 0;
  for (const auto& n : notes) {
    Note note;
    note.id = "n" + std::to_string(++k);
    note.midi_pitch = n.pitch;
    part.add_object(note, n.onset, n.onset + n.duration);
  }
  part.freeze();
  return part;
}

/// One octave from middle C upward, major or harmonic minor, tonic held twice as long.
inline scoreline::Part scale_part(int tonic, scoreline::Mode mode) {
  using namespace scoreline;
  static const int major[7] = {0, 2, 4, 5, 7, 9, 11};
  static const int harmonic_minor[7] = {0, 2, 3, 5, 7, 8, 11};
  std::vector<NoteSpec> notes;
  Time t = 0;
  for (int d = 0; d < 7; ++d) {
    Time len = d == 0 ? 2 : 1;  // doubled tonic
    notes.push_back({t, len, 60 + tonic + (mode == Mode::major ? major : harmonic_minor)[d]});
    t += len;
  }
  return make_part(notes);
}

}  // namespace testing_support
