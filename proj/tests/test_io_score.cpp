#include <gtest/gtest.h>

#include "support.hpp"

using namespace scoreline;
using testing_support::data;
using testing_support::first_part;
using testing_support::load;

namespace {

std::string csv_of(const ScoreDocument& doc) {
  NoteArrayOptions o;
  o.include_time_signature = true;
  return to_csv(note_array(doc, o));
}

std::vector<std::pair<NavigationKind, std::pair<Time, Time>>> marks(const Part& p) {
  std::vector<std::pair<NavigationKind, std::pair<Time, Time>>> out;
  for (const auto& m : p.objects_of<NavigationMark>()) out.push_back({m->kind, {m.start, m.end}});
  return out;
}

const char* kMinimalHead = R"(<?xml version="1.0"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>A</part-name></score-part></part-list>
  <part id="P1"><measure number="1">
    <attributes><divisions>1</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>
)";

}  // namespace

TEST(Sniff, RecognisesEachFormat) {
  EXPECT_EQ(sniff_format(read_file(data("minimal.musicxml"))), SourceFormat::musicxml);
  EXPECT_EQ(sniff_format(read_file(data("scale.krn"))), SourceFormat::kern);
  EXPECT_EQ(sniff_format(read_file(data("simple.mei"))), SourceFormat::mei);
  EXPECT_EQ(sniff_format(read_file(data("two_tempo.mid"))), SourceFormat::midi);
  try {
    sniff_format("hello world");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::format_detection);
  }
}

TEST(MusicXml, MinimalDocument) {
  auto doc = load("minimal.musicxml");
  ASSERT_EQ(doc.parts().size(), 1u);
  const Part& p = first_part(doc);
  auto notes = notes_sorted(p);
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_EQ(notes[0]->id, "n1");
  EXPECT_EQ(notes[0]->midi_pitch, 60);
  EXPECT_EQ(convert_time(p, notes[0].end - notes[0].start, TimeUnit::div, TimeUnit::quarter), Rational(4));
  EXPECT_EQ(p.name(), "Piano");
}

TEST(MusicXml, TiesMergeInNoteArrays) {
  auto doc = load("two_part.musicxml");
  ASSERT_EQ(doc.parts().size(), 2u);
  const Part& cello = *doc.parts()[1];
  EXPECT_EQ(cello.objects_of<Note>().size(), 3u);
  auto arr = note_array(cello);
  ASSERT_EQ(arr.size(), 2u);
  EXPECT_EQ(arr.records[0].duration_quarter, Rational(4));
  EXPECT_EQ(arr.records[0].pitch, 43);
  NoteArrayOptions raw;
  raw.merge_ties = false;
  EXPECT_EQ(note_array(cello, raw).size(), 3u);
}

TEST(MusicXml, NavigationMarks) {
  auto volta = load("volta.musicxml");
  auto m = marks(first_part(volta));
  using K = NavigationKind;
  std::vector<std::pair<K, std::pair<Time, Time>>> expected{
      {K::repeat_start, {0, 0}}, {K::volta, {4, 8}}, {K::repeat_end, {8, 8}}, {K::volta, {8, 12}}};
  std::sort(m.begin(), m.end(), [](auto& a, auto& b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
  std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
  EXPECT_EQ(m, expected);

  auto fine = marks(first_part(load("dc_al_fine.musicxml")));
  std::vector<std::pair<K, std::pair<Time, Time>>> expected_fine{{K::fine, {8, 8}}, {K::da_capo, {16, 16}}};
  EXPECT_EQ(fine, expected_fine);
}

TEST(MusicXml, MalformedXmlReportsLocation) {
  std::string broken = std::string(kMinimalHead) + "<note><pitch><step>C</step></pitch>\n</measure>";
  try {
    load_musicxml(broken);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::parse);
    EXPECT_GT(e.line(), 0u);
  }
}

TEST(MusicXml, StrictEscalatesSkippedElements) {
  std::string doc = std::string(kMinimalHead) +
                    "<note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration>"
                    "<mystery/></note></measure></part></score-partwise>\n";
  auto lenient = load_musicxml(doc);
  EXPECT_FALSE(lenient.warnings.empty());
  LoadOptions strict;
  strict.strict = true;
  EXPECT_THROW(load_musicxml(doc, strict), ParseError);
}

TEST(MusicXml, MissingFileIsIoError) {
  try {
    load_score_file(data("does_not_exist.musicxml"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
    EXPECT_NE(std::string(e.what()).find("does_not_exist"), std::string::npos);
  }
}

TEST(MusicXml, RoundTripKeepsNoteArrays) {
  for (const auto& name : testing_support::score_corpus()) {
    auto doc = load(name);
    auto again = load_musicxml(save_musicxml(doc));
    EXPECT_EQ(csv_of(again), csv_of(doc)) << name;
    ASSERT_EQ(again.parts().size(), doc.parts().size()) << name;
    for (std::size_t i = 0; i < doc.parts().size(); ++i)
      EXPECT_EQ(marks(*again.parts()[i]), marks(*doc.parts()[i])) << name;
  }
}

TEST(MusicXml, SavedDocumentIsStable) {
  // save(load(save(x))) == save(x): the writer is a fixed point after one pass
  for (const auto& name : testing_support::score_corpus()) {
    std::string once = save_musicxml(load(name));
    EXPECT_EQ(save_musicxml(load_musicxml(once)), once) << name;
  }
}

TEST(Kern, ScaleWithBass) {
  auto doc = load("scale.krn");
  ASSERT_EQ(doc.parts().size(), 2u);
  const Part& treble = *doc.parts()[0];
  const Part& bass = *doc.parts()[1];
  EXPECT_EQ(treble.name(), "Treble");
  EXPECT_EQ(bass.name(), "Bass");
  auto ks = treble.objects_of<KeySignature>();
  ASSERT_FALSE(ks.empty());
  EXPECT_EQ(ks.front()->fifths, 1);
  auto ts = treble.objects_of<TimeSignature>();
  ASSERT_FALSE(ts.empty());
  EXPECT_EQ(*ts.front().value, (TimeSignature{3, 4}));

  std::vector<int> pitches;
  for (const auto& n : notes_sorted(treble)) pitches.push_back(n->midi_pitch);
  EXPECT_EQ(pitches, (std::vector<int>{67, 69, 71, 72, 74, 73, 74, 79}));
  // final chord in the bass spine
  auto bass_notes = notes_sorted(bass);
  ASSERT_EQ(bass_notes.size(), 6u);
  EXPECT_EQ(bass_notes[4].start, bass_notes[5].start);
  EXPECT_EQ(bass_notes[0]->step, 'G');
  EXPECT_EQ(bass_notes[0]->octave, 2);
}

TEST(Kern, FieldCountMismatchIsParseError) {
  std::string bad = "**kern\t**kern\n4c\t4d\n4e\n*-\t*-\n";
  try {
    load_kern(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Kern, NeedsAKernSpine) { EXPECT_THROW(load_kern("**text\nhello\n*-\n"), ParseError); }

TEST(Mei, NotesChordsTupletsAndTies) {
  auto doc = load("simple.mei");
  ASSERT_EQ(doc.parts().size(), 1u);
  const Part& p = first_part(doc);
  EXPECT_EQ(p.name(), "Flute");
  auto arr = note_array(p);
  ASSERT_EQ(arr.size(), 9u);
  // key.sig 1f lowers the B in the chord; accid="s" raises the C
  EXPECT_EQ(p.find_note("m5")->as<Note>()->midi_pitch, 70);
  EXPECT_EQ(p.find_note("m6")->as<Note>()->midi_pitch, 73);
  // triplet eighths are a third of a quarter
  EXPECT_EQ(arr.records[5].duration_quarter, Rational(1, 3));
  EXPECT_EQ(arr.records[6].onset_quarter, Rational(13, 3));
  // m9 tied into m10: one merged record of six quarters
  EXPECT_EQ(arr.records.back().id, "m9");
  EXPECT_EQ(arr.records.back().duration_quarter, Rational(6));
  auto ks = p.objects_of<KeySignature>();
  ASSERT_FALSE(ks.empty());
  EXPECT_EQ(ks.front()->fifths, -1);
  EXPECT_EQ(ks.front()->mode, Mode::minor);
}

TEST(Mei, RejectsDocumentsWithoutScore) {
  EXPECT_THROW(load_mei(R"(<mei xmlns="http://www.music-encoding.org/ns/mei"><music/></mei>)"), Error);
}
