#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"

using namespace scoreline;
using testing_support::load;
using testing_support::first_part;

namespace {

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCategory::io;
}

}  // namespace

TEST(Pitch, MidiFromSpelling) {
  EXPECT_EQ(midi_pitch('C', 0, 4), 60);
  EXPECT_EQ(midi_pitch('A', 0, 4), 69);
  EXPECT_EQ(midi_pitch('B', 1, 3), 60);
  EXPECT_EQ(midi_pitch('C', -1, 4), 59);
  EXPECT_EQ(midi_pitch('A', 0, 0), 21);
}

TEST(Part, RejectsBadIntervals) {
  Part p;
  EXPECT_EQ(category_of([&] { p.add_object(Rest{}, -1, 2); }), ErrorCategory::range);
  EXPECT_EQ(category_of([&] { p.add_object(Rest{}, 3, 2); }), ErrorCategory::range);
  EXPECT_EQ(category_of([&] { p.add_object(Note::spelled("a", 'C', 0, 4), 2, 2); }), ErrorCategory::range);
  Note grace = Note::spelled("g", 'D', 0, 4);
  grace.grace = true;
  EXPECT_NO_THROW(p.add_object(grace, 2, 2));
}

TEST(Part, DuplicateNoteIdIsIdentityError) {
  Part p;
  p.add_object(Note::spelled("x", 'C', 0, 4), 0, 1);
  EXPECT_EQ(category_of([&] { p.add_object(Note::spelled("x", 'D', 0, 4), 1, 2); }), ErrorCategory::identity);
}

TEST(Part, FrozenRejectsMutation) {
  Part p;
  p.add_object(Note::spelled("x", 'C', 0, 4), 0, 1);
  p.freeze();
  EXPECT_EQ(category_of([&] { p.add_object(Rest{}, 0, 1); }), ErrorCategory::frozen);
  EXPECT_EQ(category_of([&] { p.set_divs_per_quarter(0, 2); }), ErrorCategory::frozen);
}

TEST(Part, ObjectsRegisteredAtTheirTimePoints) {
  for (const auto& name : testing_support::score_corpus()) {
    auto doc = load(name);
    for (const Part* part : doc.parts()) {
      const auto& tl = part->timeline();
      for (ObjectRef r = 0; r < part->objects().size(); ++r) {
        const auto& o = part->object(r);
        ASSERT_TRUE(tl.contains(o.start)) << name;
        ASSERT_TRUE(tl.contains(o.end)) << name;
        const auto& s = tl.at(o.start).starting;
        const auto& e = tl.at(o.end).ending;
        EXPECT_NE(std::find(s.begin(), s.end(), r), s.end()) << name;
        EXPECT_NE(std::find(e.begin(), e.end(), r), e.end()) << name;
        EXPECT_LE(o.start, o.end);
      }
    }
  }
}

TEST(Part, MeasuresTileTheTimeline) {
  for (const auto& name : testing_support::score_corpus()) {
    auto doc = load(name);
    for (const Part* part : doc.parts()) {
      auto measures = part->objects_of<Measure>();
      ASSERT_FALSE(measures.empty()) << name;
      EXPECT_EQ(measures.front().start, 0) << name;
      for (std::size_t i = 1; i < measures.size(); ++i) EXPECT_EQ(measures[i].start, measures[i - 1].end) << name;
    }
  }
}

TEST(Part, DescriptionIgnoresInsertionOrder) {
  std::mt19937 rng(7);
  std::vector<std::pair<ObjectData, std::pair<Time, Time>>> items;
  for (int i = 0; i < 30; ++i) {
    Time s = rng() % 40, d = 1 + rng() % 5;
    items.push_back({Note::spelled("n" + std::to_string(i), "CDEFGAB"[i % 7], 0, 4), {s, s + d}});
  }
  items.push_back({Measure{1}, {0, 48}});
  items.push_back({TimeSignature{3, 4}, {0, 0}});
  auto build = [&](const auto& order) {
    Part p("P1", "", 2);
    for (const auto& [data, t] : order) p.add_object(data, t.first, t.second);
    p.freeze();
    return describe_timeline(p);
  };
  auto reference = build(items);
  for (int round = 0; round < 10; ++round) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(build(items), reference);
  }
}

TEST(TimeMap, BeatsPerQuarter) {
  EXPECT_EQ(beats_per_quarter({4, 4}, BeatMode::slow), Rational(1));
  EXPECT_EQ(beats_per_quarter({12, 8}, BeatMode::slow), Rational(2));
  EXPECT_EQ(beats_per_quarter({12, 8}, BeatMode::fast), Rational(2, 3));
  EXPECT_EQ(beats_per_quarter({6, 8}, BeatMode::fast), Rational(2, 3));
  EXPECT_EQ(beats_per_quarter({2, 2}, BeatMode::slow), Rational(1, 2));
  EXPECT_EQ(beats_per_quarter({3, 4}, BeatMode::fast), Rational(1));
  EXPECT_TRUE(is_compound({12, 8}));
  EXPECT_FALSE(is_compound({3, 4}));
}

TEST(TimeMap, AnacrusisStartsBeforeBeatZero) {
  auto doc = load("anacrusis.musicxml");
  const Part& part = first_part(doc);
  TimeMap slow(part), fast(part, BeatMode::fast);
  // the pickup is one eighth; the beat origin is the first downbeat
  EXPECT_EQ(slow.downbeat(), part.divs_per_quarter_at(0) / 2);
  EXPECT_EQ(slow.convert(0, TimeUnit::div, TimeUnit::beat), Rational(-1));
  EXPECT_EQ(fast.convert(0, TimeUnit::div, TimeUnit::beat), Rational(-1, 3));
  EXPECT_EQ(slow.convert(0, TimeUnit::div, TimeUnit::quarter), Rational(0));
}

TEST(TimeMap, DivisionChangesConvertExactly) {
  auto doc = load("divisions_change.musicxml");
  const Part& part = first_part(doc);
  TimeMap map(part);
  // hand-derived: 2 quarters at divisions 1, a triplet group and a quarter at 3, then eighths at 2
  auto notes = notes_sorted(part);
  std::vector<Rational> expected{0, 1, 2, Rational(7, 3), Rational(8, 3), 3, 4, Rational(9, 2), 5};
  ASSERT_EQ(notes.size(), expected.size());
  for (std::size_t i = 0; i < notes.size(); ++i) EXPECT_EQ(map.div_to_quarter(notes[i].start), expected[i]) << i;
}

TEST(TimeMap, ConversionsRoundTrip) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Part p("P1", "", 1 + static_cast<int>(rng() % 8));
    Time t = 0;
    for (int m = 0; m < 6; ++m) {
      int beats = 1 + static_cast<int>(rng() % 12), type = 1 << (1 + rng() % 3);
      p.add_object(TimeSignature{beats, type}, t, t);
      Time len = beats * p.divs_per_quarter_at(0) * 4 / type;
      if (len == 0) len = 1;
      p.add_object(Measure{m + 1}, t, t + len);
      t += len;
    }
    p.freeze();
    for (BeatMode mode : {BeatMode::slow, BeatMode::fast}) {
      TimeMap map(p, mode);
      Rational prev_q = -1, prev_b = -1000;
      for (Time d = 0; d <= t; ++d) {
        Rational q = map.div_to_quarter(d), b = map.quarter_to_beat(q);
        EXPECT_EQ(map.quarter_to_div(q), Rational(d));
        EXPECT_EQ(map.beat_to_quarter(b), q);
        EXPECT_GT(q, prev_q);
        EXPECT_GT(b, prev_b);
        prev_q = q;
        prev_b = b;
      }
    }
  }
}

TEST(TimeMap, BeatsNeedATimeSignature) {
  auto part = testing_support::make_part({{0, 1, 60}}, 1, std::nullopt);
  EXPECT_EQ(category_of([&] { convert_time(part, 0, TimeUnit::div, TimeUnit::beat); }),
            ErrorCategory::missing_context);
  EXPECT_EQ(convert_time(part, 3, TimeUnit::div, TimeUnit::quarter), Rational(3));
}

TEST(PerformedPart, FreezeAssignsIdsInOnsetOrder) {
  PerformedPart perf;
  perf.add_note({"", 1.0, 0.5, 62, 64, 0, 0});
  perf.add_note({"", 0.0, 0.5, 60, 64, 0, 0});
  perf.freeze();
  ASSERT_EQ(perf.notes().size(), 2u);
  EXPECT_EQ(perf.notes()[0].id, "n1");
  EXPECT_EQ(perf.notes()[0].midi_pitch, 60);
  EXPECT_EQ(perf.notes()[1].id, "n2");
  EXPECT_EQ(category_of([&] { perf.add_note({}); }), ErrorCategory::frozen);
}

TEST(PerformedPart, DuplicateIdsRejected) {
  PerformedPart perf;
  perf.add_note({"a", 0, 1, 60, 64, 0, 0});
  perf.add_note({"a", 1, 1, 62, 64, 0, 0});
  EXPECT_EQ(category_of([&] { perf.freeze(); }), ErrorCategory::identity);
}

TEST(Alignment, ValidationRules) {
  Alignment ok;
  ok.add_match("s1", "p1");
  ok.add_deletion("s2");
  ok.add_insertion("p2");
  ok.add_ornament("s1", "p3");
  EXPECT_NO_THROW(ok.validate());
  EXPECT_EQ(ok.count(AlignmentLabel::match), 1u);

  Alignment twice;
  twice.add_match("s1", "p1");
  twice.add_match("s1", "p2");
  EXPECT_EQ(category_of([&] { twice.validate(); }), ErrorCategory::identity);

  Alignment bad;
  bad.pairs.push_back({AlignmentLabel::insertion, std::string("s1"), std::string("p1")});
  EXPECT_EQ(category_of([&] { bad.validate(); }), ErrorCategory::identity);
}
