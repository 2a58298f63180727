#include <gtest/gtest.h>

#include "support.hpp"

using namespace scoreline;
using testing_support::data;

namespace {

MatchFile fixture() { return load_match(read_file(data("perf.match"))); }

void expect_same_performance(const PerformedPart& a, const PerformedPart& b) {
  ASSERT_EQ(a.notes().size(), b.notes().size());
  for (std::size_t i = 0; i < a.notes().size(); ++i) {
    const auto &x = a.notes()[i], &y = b.notes()[i];
    EXPECT_EQ(x.id, y.id);
    EXPECT_EQ(x.midi_pitch, y.midi_pitch);
    EXPECT_EQ(x.velocity, y.velocity);
    EXPECT_EQ(x.channel, y.channel);
    EXPECT_EQ(x.track, y.track);
    EXPECT_DOUBLE_EQ(x.onset_sec, y.onset_sec);
    EXPECT_DOUBLE_EQ(x.duration_sec, y.duration_sec);
  }
  ASSERT_EQ(a.controls().size(), b.controls().size());
  for (std::size_t i = 0; i < a.controls().size(); ++i) {
    EXPECT_DOUBLE_EQ(a.controls()[i].time_sec, b.controls()[i].time_sec);
    EXPECT_EQ(a.controls()[i].value, b.controls()[i].value);
  }
}

}  // namespace

TEST(Match, LoadsFixture) {
  MatchFile m = fixture();
  EXPECT_EQ(m.alignment.count(AlignmentLabel::match), 7u);
  EXPECT_EQ(m.alignment.count(AlignmentLabel::insertion), 1u);
  EXPECT_EQ(m.alignment.count(AlignmentLabel::deletion), 1u);
  EXPECT_EQ(m.alignment.count(AlignmentLabel::ornament), 1u);
  EXPECT_EQ(m.performance.notes().size(), 9u);
  EXPECT_EQ(m.performance.controls().size(), 3u);
  ASSERT_NE(m.info_value("midiClockUnits"), nullptr);
  EXPECT_EQ(*m.info_value("midiClockUnits"), "480");

  // 480 units per quarter at 500000 us: tick 975 is 975/960 s
  const PerformedNote* p3 = m.performance.find_note("p3");
  ASSERT_NE(p3, nullptr);
  EXPECT_DOUBLE_EQ(p3->onset_sec, 975.0 / 960.0);
  EXPECT_DOUBLE_EQ(p3->duration_sec, (1440.0 - 975.0) / 960.0);

  ASSERT_TRUE(m.score.has_value());
  const Part& part = *m.score->parts().front();
  EXPECT_EQ(part.objects_of<Note>().size(), 8u);
  auto arr = note_array(part);
  const NoteRecord* f_sharp = nullptr;
  for (const auto& r : arr.records)
    if (r.id == "n4") f_sharp = &r;
  ASSERT_NE(f_sharp, nullptr);
  EXPECT_EQ(f_sharp->pitch, 66);
  EXPECT_EQ(f_sharp->onset_beat, Rational(3));
  EXPECT_EQ(f_sharp->duration_quarter, Rational(1, 2));
}

TEST(Match, RoundTripIsExact) {
  MatchFile a = fixture();
  MatchFile b = load_match(save_match(a));
  EXPECT_EQ(a.alignment, b.alignment);
  EXPECT_EQ(a.snotes, b.snotes);
  expect_same_performance(a.performance, b.performance);
  EXPECT_EQ(save_match(b), save_match(a));
}

TEST(Match, SaveFromModelObjects) {
  MatchFile a = fixture();
  const Part& part = *a.score->parts().front();
  std::string text = save_match(part, a.performance, a.alignment);
  MatchFile b = load_match(text);
  EXPECT_EQ(b.alignment, a.alignment);
  expect_same_performance(a.performance, b.performance);
  ASSERT_TRUE(b.score.has_value());
  EXPECT_EQ(to_csv(note_array(*b.score)), to_csv(note_array(*a.score)));
}

TEST(Match, UnresolvedIdsAreIdentityErrors) {
  MatchFile a = fixture();
  Alignment broken = a.alignment;
  broken.add_match("nope", "p1");
  try {
    save_match(*a.score->parts().front(), a.performance, broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::identity);
  }
}

TEST(Match, MalformedLineNamesTheLine) {
  std::string text = "info(midiClockUnits,480).\nsnote(n1,[C,n],4,1:1,0,1,0,1,[])-note(p1,60,0,10,64,0).\n";
  try {
    load_match(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_match("snote(n1,[C,n],4,1:1,0,1,0,1,[])-note(p1,60,0,10,64,0,1)\n"), ParseError);
}

TEST(Match, ConflictingDuplicatesRejected) {
  std::string text =
      "snote(n1,[C,n],4,1:1,0,1,0,1,[])-note(p1,60,0,10,64,0,1).\n"
      "snote(n1,[D,n],4,1:1,0,1,0,1,[])-note(p2,62,0,10,64,0,1).\n";
  try {
    load_match(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::identity);
  }
}

TEST(Corresp, LoadsFixture) {
  Alignment a = load_corresp(read_file(data("perf_corresp.txt")));
  EXPECT_EQ(a.count(AlignmentLabel::match), 4u);
  EXPECT_EQ(a.count(AlignmentLabel::insertion), 1u);
  EXPECT_EQ(a.count(AlignmentLabel::deletion), 1u);
  // reference side is the score
  EXPECT_EQ(a.pairs.front().score_id, "n1");
  EXPECT_EQ(a.pairs.front().perf_id, "p1");
}

TEST(Corresp, WrongColumnCountNamesTheRow) {
  std::string text = "//header\np1\t0.0\t60\tC4\t64\tn1\t0.0\t60\tC4\t1\np2\t0.5\t62\n";
  try {
    load_corresp(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(load_corresp("*\t-1\t*\t*\t-1\t*\t-1\t*\t*\t-1\n"), Error);
}
