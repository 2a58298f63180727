#include "scoreline/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "scoreline/errors.hpp"
#include "ties.hpp"

namespace scoreline {

namespace {

bool record_less_score(const NoteRecord& a, const NoteRecord& b) {
  return std::tie(a.onset_div, a.pitch, a.id) < std::tie(b.onset_div, b.pitch, b.id);
}

bool record_less_perf(const NoteRecord& a, const NoteRecord& b) {
  return std::tie(a.onset_sec, a.pitch, a.id) < std::tie(b.onset_sec, b.pitch, b.id);
}

const TimeSignature* signature_at(const std::vector<Timed<TimeSignature>>& sigs, Time t) {
  const TimeSignature* found = sigs.empty() ? nullptr : sigs.front().value;
  for (const auto& s : sigs)
    if (s.start <= t) found = s.value;
  return found;
}

/// Score array with div columns expressed at `grid` divs per quarter
/// (0 keeps the part's own div positions).
NoteArray score_array(const Part& part, const NoteArrayOptions& options, std::int64_t grid) {
  NoteArray out;
  out.kind = NoteArray::Kind::score;
  out.has_time_signature = options.include_time_signature;
  for (const auto& f : options.extra_features) out.extra_names.push_back(f.name);

  TimeMap map(part, options.beat_mode);
  bool has_ts = map.has_time_signature();
  if (!has_ts && !part.objects_of<Note>().empty())
    out.warnings.push_back({part.id(), "no time signature; beat columns equal quarter columns"});
  auto sigs = part.objects_of<TimeSignature>();

  auto chains = options.merge_ties ? detail::merge_tied_notes(part) : detail::unmerged_notes(part);
  out.records.reserve(chains.size());
  for (const auto& c : chains) {
    const Note& n = *c.first.value;
    NoteRecord r;
    r.id = n.id;
    r.pitch = n.midi_pitch;
    r.voice = n.voice;
    r.staff = n.staff;
    Rational q0 = map.div_to_quarter(c.first.start);
    Rational q1 = map.div_to_quarter(c.end);
    r.onset_quarter = q0;
    r.duration_quarter = q1 - q0;
    if (grid > 0) {
      r.onset_div = (q0 * grid).numerator();
      r.duration_div = (q1 * grid).numerator() - r.onset_div;
    } else {
      r.onset_div = c.first.start;
      r.duration_div = c.end - c.first.start;
    }
    if (has_ts) {
      r.onset_beat = map.quarter_to_beat(q0);
      r.duration_beat = map.quarter_to_beat(q1) - r.onset_beat;
    } else {
      r.onset_beat = r.onset_quarter;
      r.duration_beat = r.duration_quarter;
    }
    if (options.include_time_signature)
      if (const TimeSignature* ts = signature_at(sigs, c.first.start)) {
        r.ts_beats = ts->beats;
        r.ts_beat_type = ts->beat_type;
      }
    for (const auto& f : options.extra_features) {
      try {
        r.extra.push_back(f.compute(part, n, r));
      } catch (const std::exception& e) {
        throw Error(ErrorCategory::feature, "feature '" + f.name + "' failed on note '" + n.id + "': " + e.what());
      }
    }
    out.records.push_back(std::move(r));
  }
  std::sort(out.records.begin(), out.records.end(), record_less_score);
  return out;
}

void put_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

void put_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

struct RollNote {
  Rational onset;  // relative to the roll origin, in the chosen unit
  Rational duration;
  int pitch;
  int value;
};

PianoRoll build_roll(const std::vector<RollNote>& notes, const Rational& span, const PianoRollOptions& options,
                     bool velocities) {
  PianoRoll roll;
  roll.velocity_values = velocities;
  roll.rows = options.piano_range ? 88 : 128;
  roll.lowest_pitch = options.piano_range ? 21 : 0;
  Rational td(options.time_div);
  roll.cols = span > 0 ? ceil(span * td) : 0;
  std::map<std::pair<int, std::int64_t>, int> cells;
  std::size_t clipped = 0;
  for (const auto& n : notes) {
    if (n.duration <= 0) continue;  // grace notes
    int row = n.pitch - roll.lowest_pitch;
    if (row < 0 || row >= roll.rows) {
      ++clipped;
      continue;
    }
    std::int64_t lo = floor(n.onset * td);
    std::int64_t hi = std::max(lo, ceil((n.onset + n.duration) * td) - 1);
    if (options.fill == RollFill::onset_only) hi = lo;
    for (std::int64_t col = lo; col <= hi; ++col) {
      int& v = cells[{row, col}];
      v = std::max(v, n.value);
    }
  }
  if (clipped)
    roll.warnings.push_back({"", std::to_string(clipped) + " note(s) outside the piano range (21-108) clipped"});
  roll.cells.reserve(cells.size());
  for (const auto& [k, v] : cells) roll.cells.push_back({k.first, k.second, v});
  return roll;
}

void check_time_div(const PianoRollOptions& options) {
  if (options.time_div <= 0) throw Error(ErrorCategory::range, "time_div must be positive");
}

/// Appends the notes of a score part in the requested unit, relative to div 0.
void collect_score_notes(const Part& part, const PianoRollOptions& options, std::int64_t grid,
                         std::vector<RollNote>& notes, Rational& span) {
  if (options.unit == RollUnit::sec)
    throw Error(ErrorCategory::range, "seconds are only available for performances");
  TimeMap map(part, options.beat_mode);
  if (options.unit == RollUnit::beat && !map.has_time_signature())
    throw Error(ErrorCategory::missing_context, "beat unit needs a time signature in part '" + part.id() + "'");
  auto pos = [&](Time div) -> Rational {
    Rational q = map.div_to_quarter(div);
    switch (options.unit) {
      case RollUnit::div: return grid > 0 ? q * grid : Rational(div);
      case RollUnit::quarter: return q;
      case RollUnit::beat: return map.quarter_to_beat(q) - map.quarter_to_beat(0);
      case RollUnit::sec: break;
    }
    return q;
  };
  for (const auto& c : detail::merge_tied_notes(part)) {
    if (c.first.value->grace) continue;
    Rational on = pos(c.first.start), off = pos(c.end);
    notes.push_back({on, off - on, c.first.value->midi_pitch, 1});
  }
  if (!part.timeline().empty()) span = std::max(span, pos(part.last_time()));
}

std::int64_t common_grid(const std::vector<const Part*>& parts) {
  std::int64_t grid = 1;
  for (const Part* p : parts)
    for (const auto& [t, d] : p->divs_map()) grid = std::lcm(grid, static_cast<std::int64_t>(d));
  return grid;
}

}  // namespace

NoteArray note_array(const Part& part, const NoteArrayOptions& options) { return score_array(part, options, 0); }

NoteArray note_array(const PerformedPart& performance) {
  NoteArray out;
  out.kind = NoteArray::Kind::performance;
  for (const auto& n : performance.notes()) {
    NoteRecord r;
    r.id = n.id;
    r.pitch = n.midi_pitch;
    r.onset_sec = n.onset_sec;
    r.duration_sec = n.duration_sec;
    r.velocity = n.velocity;
    r.track = n.track;
    r.channel = n.channel;
    out.records.push_back(std::move(r));
  }
  std::sort(out.records.begin(), out.records.end(), record_less_perf);
  return out;
}

NoteArray note_array(const ScoreDocument& doc, const NoteArrayOptions& options) {
  auto parts = doc.parts();
  if (parts.size() == 1) return note_array(*parts.front(), options);
  std::int64_t grid = common_grid(parts);
  NoteArray out;
  out.kind = NoteArray::Kind::score;
  out.has_time_signature = options.include_time_signature;
  for (const auto& f : options.extra_features) out.extra_names.push_back(f.name);
  // ids are unique within a part only; qualify them when parts collide
  std::set<std::string> seen;
  bool collide = false;
  for (const Part* p : parts)
    for (const auto& n : p->objects_of<Note>()) collide |= !seen.insert(n->id).second;
  for (const Part* p : parts) {
    NoteArray a = score_array(*p, options, grid);
    if (collide)
      for (auto& r : a.records) r.id = p->id() + "-" + r.id;
    out.records.insert(out.records.end(), std::make_move_iterator(a.records.begin()),
                       std::make_move_iterator(a.records.end()));
    out.warnings.insert(out.warnings.end(), a.warnings.begin(), a.warnings.end());
  }
  std::stable_sort(out.records.begin(), out.records.end(), record_less_score);
  return out;
}

void write_csv(const NoteArray& array, std::ostream& out) {
  bool score = array.kind == NoteArray::Kind::score;
  if (score) {
    out << "onset_beat,duration_beat,onset_quarter,duration_quarter,onset_div,duration_div,pitch,voice,id";
    if (array.has_time_signature) out << ",ts_beats,ts_beat_type";
  } else {
    out << "onset_sec,duration_sec,pitch,velocity,track,channel,id";
  }
  for (const auto& name : array.extra_names) {
    out << ',';
    put_field(out, name);
  }
  out << '\n';
  for (const auto& r : array.records) {
    if (score) {
      put_number(out, to_double(r.onset_beat));
      out << ',';
      put_number(out, to_double(r.duration_beat));
      out << ',';
      put_number(out, to_double(r.onset_quarter));
      out << ',';
      put_number(out, to_double(r.duration_quarter));
      out << ',' << r.onset_div << ',' << r.duration_div << ',' << r.pitch << ',' << r.voice << ',';
      put_field(out, r.id);
      if (array.has_time_signature) {
        out << ',';
        if (r.ts_beats) out << *r.ts_beats;
        out << ',';
        if (r.ts_beat_type) out << *r.ts_beat_type;
      }
    } else {
      put_number(out, r.onset_sec);
      out << ',';
      put_number(out, r.duration_sec);
      out << ',' << r.pitch << ',' << r.velocity << ',' << r.track << ',' << r.channel << ',';
      put_field(out, r.id);
    }
    for (double v : r.extra) {
      out << ',';
      put_number(out, v);
    }
    out << '\n';
  }
}

std::string to_csv(const NoteArray& array) {
  std::ostringstream out;
  write_csv(array, out);
  return std::move(out).str();
}

int PianoRoll::at(int row, std::int64_t col) const {
  auto it = std::lower_bound(cells.begin(), cells.end(), std::make_pair(row, col),
                             [](const Cell& c, const std::pair<int, std::int64_t>& k) {
                               return std::tie(c.row, c.col) < std::tie(k.first, k.second);
                             });
  return it != cells.end() && it->row == row && it->col == col ? it->value : 0;
}

PianoRoll compute_pianoroll(const Part& part, const PianoRollOptions& options) {
  check_time_div(options);
  std::vector<RollNote> notes;
  Rational span = 0;
  collect_score_notes(part, options, 0, notes, span);
  return build_roll(notes, span, options, false);
}

PianoRoll compute_pianoroll(const PerformedPart& performance, const PianoRollOptions& options) {
  check_time_div(options);
  if (options.unit != RollUnit::sec)
    throw Error(ErrorCategory::range, "performances only support the seconds unit");
  // seconds are taken at microsecond resolution so frame arithmetic stays exact
  auto exact = [](double sec) { return Rational(std::llround(sec * 1e6), 1000000); };
  std::vector<RollNote> notes;
  Rational span = 0;
  for (const auto& n : performance.notes()) {
    Rational on = exact(n.onset_sec), off = exact(n.offset_sec());
    notes.push_back({on, off - on, n.midi_pitch, n.velocity});
    span = std::max(span, off);
  }
  return build_roll(notes, span, options, true);
}

PianoRoll compute_pianoroll(const ScoreDocument& doc, const PianoRollOptions& options) {
  check_time_div(options);
  auto parts = doc.parts();
  std::int64_t grid = parts.size() > 1 ? common_grid(parts) : 0;
  std::vector<RollNote> notes;
  Rational span = 0;
  for (const Part* p : parts) collect_score_notes(*p, options, grid, notes, span);
  return build_roll(notes, span, options, false);
}

void write_csv(const PianoRoll& roll, std::ostream& out) {
  out << roll.rows << ',' << roll.cols << '\n';
  for (const auto& c : roll.cells) out << c.row << ',' << c.col << ',' << c.value << '\n';
}

void write_pgm(const PianoRoll& roll, std::ostream& out, int score_value) {
  out << "P2\n" << roll.cols << ' ' << roll.rows << "\n127\n";
  std::vector<int> line(static_cast<std::size_t>(roll.cols));
  auto cell = roll.cells.end();
  for (int row = roll.rows - 1; row >= 0; --row) {
    std::fill(line.begin(), line.end(), 0);
    auto lo = std::lower_bound(roll.cells.begin(), roll.cells.end(), row,
                               [](const PianoRoll::Cell& c, int r) { return c.row < r; });
    for (cell = lo; cell != roll.cells.end() && cell->row == row; ++cell)
      if (cell->col >= 0 && cell->col < roll.cols)
        line[static_cast<std::size_t>(cell->col)] = std::clamp(roll.velocity_values ? cell->value : score_value, 0, 127);
    for (std::size_t i = 0; i < line.size(); ++i) out << (i ? " " : "") << line[i];
    out << '\n';
  }
}

}  // namespace scoreline
