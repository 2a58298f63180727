#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace scoreline;
using testing_support::first_part;
using testing_support::load;
using testing_support::make_part;

namespace {

std::int64_t floor_q(const Rational& r) {
  auto q = r.numerator() / r.denominator();
  return (r.numerator() % r.denominator() != 0 && r < 0) ? q - 1 : q;
}
std::int64_t ceil_q(const Rational& r) { return -floor_q(-r); }

/// Cell map of the frame rule, independent of the library's roll builder.
std::map<std::pair<int, std::int64_t>, int> oracle_cells(const std::vector<testing_support::NoteSpec>& notes, int divs,
                                                        int td, bool piano, bool onset_only) {
  std::map<std::pair<int, std::int64_t>, int> cells;
  for (const auto& n : notes) {
    if (piano && (n.pitch < 21 || n.pitch > 108)) continue;
    Rational o(n.onset, divs), e(n.onset + n.duration, divs);
    std::int64_t first = floor_q(o * td), last = std::max(first, ceil_q(e * td) - 1);
    if (onset_only) last = first;
    for (std::int64_t c = first; c <= last; ++c) cells[{piano ? n.pitch - 21 : n.pitch, c}] = 1;
  }
  return cells;
}

}  // namespace

TEST(NoteArray, AnacrusisUnits) {
  auto doc = load("anacrusis.musicxml");
  const Part& p = first_part(doc);
  auto slow = note_array(p);
  NoteArrayOptions fast_opts;
  fast_opts.beat_mode = BeatMode::fast;
  auto fast = note_array(p, fast_opts);
  std::vector<Rational> q, sb, fb;
  for (std::size_t i = 0; i < slow.size(); ++i) {
    if (slow.records[i].staff != 1) continue;
    q.push_back(slow.records[i].onset_quarter);
    sb.push_back(slow.records[i].onset_beat);
    fb.push_back(fast.records[i].onset_beat);
  }
  // upper staff, hand-derived from the fixture: pickup eighth, downbeat at quarter 1/2
  EXPECT_EQ(q, (std::vector<Rational>{0, 1, 5, 6, 7, 8, Rational(19, 2)}));
  EXPECT_EQ(sb, (std::vector<Rational>{-1, 1, 9, 11, 13, 15, 18}));
  EXPECT_EQ(fb, (std::vector<Rational>{Rational(-1, 3), Rational(1, 3), 3, Rational(11, 3), Rational(13, 3), 5, 6}));
}

TEST(NoteArray, TimeSignatureColumns) {
  NoteArrayOptions o;
  o.include_time_signature = true;
  auto arr = note_array(first_part(load("anacrusis.musicxml")), o);
  for (const auto& r : arr.records) {
    EXPECT_EQ(r.ts_beats, 12);
    EXPECT_EQ(r.ts_beat_type, 8);
  }
  std::string csv = to_csv(arr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "onset_beat,duration_beat,onset_quarter,duration_quarter,onset_div,duration_div,pitch,voice,id,ts_beats,"
            "ts_beat_type");
}

TEST(NoteArray, SortedByOnsetThenPitch) {
  for (const auto& name : testing_support::score_corpus()) {
    auto arr = note_array(load(name));
    for (std::size_t i = 1; i < arr.size(); ++i) {
      const auto &a = arr.records[i - 1], &b = arr.records[i];
      EXPECT_TRUE(std::tie(a.onset_div, a.pitch, a.id) < std::tie(b.onset_div, b.pitch, b.id)) << name << " row " << i;
    }
  }
}

TEST(NoteArray, UnitsAgreeWithTimeMap) {
  for (const auto& name : testing_support::score_corpus()) {
    auto doc = load(name);
    for (const Part* p : doc.parts()) {
      TimeMap map(*p);
      for (const auto& r : note_array(*p).records) {
        EXPECT_EQ(map.div_to_quarter(r.onset_div), r.onset_quarter) << name;
        EXPECT_EQ(map.quarter_to_beat(r.onset_quarter), r.onset_beat) << name;
        EXPECT_EQ(map.div_to_quarter(r.onset_div + r.duration_div) - r.onset_quarter, r.duration_quarter) << name;
      }
    }
  }
}

TEST(NoteArray, NoTimeSignatureFallsBackToQuarters) {
  auto p = make_part({{0, 2, 60}, {2, 1, 62}}, 2, std::nullopt);
  auto arr = note_array(p);
  EXPECT_FALSE(arr.warnings.empty());
  EXPECT_EQ(arr.records[1].onset_beat, Rational(1));
}

TEST(NoteArray, ExtraFeaturesAndErrors) {
  auto p = make_part({{0, 1, 60}, {1, 1, 64}});
  NoteArrayOptions o;
  o.extra_features.push_back({"twice_pitch", [](const Part&, const Note& n, const NoteRecord&) { return 2.0 * n.midi_pitch; }});
  auto arr = note_array(p, o);
  ASSERT_EQ(arr.extra_names, (std::vector<std::string>{"twice_pitch"}));
  EXPECT_EQ(arr.records[1].extra, (std::vector<double>{128.0}));

  o.extra_features.push_back({"broken", [](const Part&, const Note& n, const NoteRecord&) -> double {
                                if (n.midi_pitch == 64) throw std::runtime_error("no");
                                return 0;
                              }});
  try {
    note_array(p, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::feature);
    EXPECT_NE(std::string(e.what()).find("broken"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("n2"), std::string::npos);
  }
}

TEST(NoteArray, PerformanceRows) {
  auto perf = load_performance_midi(read_file(testing_support::data("two_tempo.mid"))).performance;
  auto arr = note_array(perf);
  ASSERT_EQ(arr.size(), 3u);
  EXPECT_EQ(arr.kind, NoteArray::Kind::performance);
  std::string csv = to_csv(arr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "onset_sec,duration_sec,pitch,velocity,track,channel,id");
  EXPECT_NE(csv.find("0.75,0.25,64,80,1,0,n3"), std::string::npos);
}

TEST(NoteArray, CsvIsDeterministic) {
  for (const auto& name : testing_support::score_corpus()) EXPECT_EQ(to_csv(note_array(load(name))), to_csv(note_array(load(name))));
}

TEST(PianoRoll, SevenQuarterShape) {
  PianoRollOptions o;
  o.time_div = 4;
  o.piano_range = true;
  auto roll = compute_pianoroll(load("seven_quarters.musicxml"), o);
  EXPECT_EQ(roll.rows, 88);
  EXPECT_EQ(roll.cols, 28);
  EXPECT_EQ(roll.lowest_pitch, 21);
}

TEST(PianoRoll, FramesMatchOracle) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    int divs = 1 + static_cast<int>(rng() % 12), td = 1 + static_cast<int>(rng() % 8);
    std::vector<testing_support::NoteSpec> notes;
    for (int i = 0; i < 12; ++i)
      notes.push_back({static_cast<Time>(rng() % (divs * 8)), static_cast<Time>(1 + rng() % (divs * 3)),
                       static_cast<int>(10 + rng() % 110)});
    auto part = make_part(notes, divs);
    for (bool piano : {false, true})
      for (bool onset_only : {false, true}) {
        PianoRollOptions o;
        o.time_div = td;
        o.piano_range = piano;
        o.fill = onset_only ? RollFill::onset_only : RollFill::full;
        auto roll = compute_pianoroll(part, o);
        auto expected = oracle_cells(notes, divs, td, piano, onset_only);
        std::map<std::pair<int, std::int64_t>, int> got;
        for (const auto& c : roll.cells) got[{c.row, c.col}] = c.value;
        ASSERT_EQ(got, expected) << "trial " << trial;
        Time span = 0;
        for (const auto& n : notes) span = std::max(span, n.onset + n.duration);
        EXPECT_EQ(roll.cols, ceil_q(Rational(span, divs) * td));
        EXPECT_EQ(roll.rows, piano ? 88 : 128);
        bool clipped = std::any_of(notes.begin(), notes.end(), [](auto& n) { return n.pitch < 21 || n.pitch > 108; });
        EXPECT_EQ(!roll.warnings.empty(), piano && clipped);
      }
  }
}

TEST(PianoRoll, UnitsForScores) {
  auto part = make_part({{0, 3, 60}, {3, 3, 62}}, 3);
  PianoRollOptions o;
  o.time_div = 1;
  o.unit = RollUnit::div;
  EXPECT_EQ(compute_pianoroll(part, o).cols, 6);
  o.unit = RollUnit::beat;
  EXPECT_EQ(compute_pianoroll(part, o).cols, 2);
  o.unit = RollUnit::sec;
  EXPECT_THROW(compute_pianoroll(part, o), Error);
}

TEST(PianoRoll, PerformanceCarriesVelocity) {
  auto perf = load_performance_midi(read_file(testing_support::data("two_tempo.mid"))).performance;
  PianoRollOptions o;
  o.unit = RollUnit::sec;
  o.time_div = 100;
  auto roll = compute_pianoroll(perf, o);
  EXPECT_EQ(roll.cols, 100);
  EXPECT_EQ(roll.at(64, 75), 80);
  EXPECT_EQ(roll.at(64, 99), 80);
  EXPECT_EQ(roll.at(64, 74), 0);
  EXPECT_EQ(roll.at(62, 74), 80);
  o.unit = RollUnit::quarter;
  EXPECT_THROW(compute_pianoroll(perf, o), Error);
}

TEST(PianoRoll, CsvAndPgm) {
  auto part = make_part({{0, 1, 60}});
  PianoRollOptions o;
  o.time_div = 2;
  auto roll = compute_pianoroll(part, o);
  std::ostringstream csv, pgm;
  write_csv(roll, csv);
  EXPECT_EQ(csv.str(), "128,2\n60,0,1\n60,1,1\n");
  write_pgm(roll, pgm);
  std::istringstream in(pgm.str());
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(h, 128);
  EXPECT_EQ(maxval, 127);
  std::vector<int> px(static_cast<std::size_t>(w * h));
  for (auto& v : px) in >> v;
  // top row is pitch 127, so pitch 60 sits on row 67
  EXPECT_EQ(px[67 * 2], 127);
  EXPECT_EQ(px[67 * 2 + 1], 127);
  EXPECT_EQ(std::count(px.begin(), px.end(), 0), w * h - 2);
}
