#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scoreline/model.hpp"
#include "scoreline/rational.hpp"
#include "scoreline/score_document.hpp"
#include "scoreline/timemap.hpp"

namespace scoreline {

/// One note-array row. Score rows fill the div/quarter/beat columns;
/// performance rows fill the second-based ones.
struct NoteRecord {
  std::string id;
  int pitch = 0;
  int voice = 0;
  int staff = 0;

  Time onset_div = 0;
  Time duration_div = 0;
  Rational onset_quarter;
  Rational duration_quarter;
  Rational onset_beat;
  Rational duration_beat;
  std::optional<int> ts_beats;
  std::optional<int> ts_beat_type;

  double onset_sec = 0;
  double duration_sec = 0;
  int velocity = 0;
  int track = 0;
  int channel = 0;

  std::vector<double> extra;  // aligned with NoteArray::extra_names
};

struct NoteArray {
  enum class Kind { score, performance };

  Kind kind = Kind::score;
  bool has_time_signature = false;
  std::vector<std::string> extra_names;
  std::vector<NoteRecord> records;
  std::vector<Warning> warnings;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// A user-supplied per-note feature column.
struct NoteFeature {
  std::string name;
  std::function<double(const Part&, const Note&, const NoteRecord&)> compute;
};

struct NoteArrayOptions {
  bool include_time_signature = false;
  bool merge_ties = true;
  BeatMode beat_mode = BeatMode::slow;
  std::vector<NoteFeature> extra_features;
};

NoteArray note_array(const Part& part, const NoteArrayOptions& options = {});
NoteArray note_array(const PerformedPart& performance);
/// All parts of a document merged into one array, re-sorted.
NoteArray note_array(const ScoreDocument& doc, const NoteArrayOptions& options = {});

/// CSV with a header of field names; numbers use '.' and shortest round-trip form.
void write_csv(const NoteArray& array, std::ostream& out);
std::string to_csv(const NoteArray& array);

enum class RollUnit { div, quarter, beat, sec };
enum class RollFill { onset_only, full };

struct PianoRollOptions {
  RollUnit unit = RollUnit::quarter;
  int time_div = 4;
  bool piano_range = false;
  RollFill fill = RollFill::full;
  BeatMode beat_mode = BeatMode::slow;
};

/// Sparse pitch x frame matrix in coordinate form.
struct PianoRoll {
  struct Cell {
    int row;
    std::int64_t col;
    int value;

    friend bool operator==(const Cell&, const Cell&) = default;
  };

  int rows = 128;
  std::int64_t cols = 0;
  int lowest_pitch = 0;  // pitch of row 0
  bool velocity_values = false;  // performance rolls carry velocities, score rolls 1
  std::vector<Cell> cells;  // sorted by (row, col), unique
  std::vector<Warning> warnings;

  int at(int row, std::int64_t col) const;
};

PianoRoll compute_pianoroll(const Part& part, const PianoRollOptions& options);
PianoRoll compute_pianoroll(const PerformedPart& performance, const PianoRollOptions& options);
PianoRoll compute_pianoroll(const ScoreDocument& doc, const PianoRollOptions& options);

/// `rows,cols` header line then one `row,col,value` line per cell.
void write_csv(const PianoRoll& roll, std::ostream& out);
/// Plain PGM (P2, maxval 127); top row is the highest pitch.
void write_pgm(const PianoRoll& roll, std::ostream& out, int score_value = 127);

}  // namespace scoreline
