#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "support.hpp"

using namespace scoreline;
using testing_support::data;

namespace {

/// Independent piecewise integration over the tempo list.
double oracle_seconds(std::int64_t tick, int ppq, const std::vector<std::pair<std::int64_t, std::int64_t>>& tempi) {
  double s = 0;
  for (std::size_t i = 0; i < tempi.size(); ++i) {
    std::int64_t from = tempi[i].first;
    std::int64_t to = i + 1 < tempi.size() ? tempi[i + 1].first : tick;
    if (from >= tick) break;
    to = std::min(to, tick);
    s += static_cast<double>(to - from) * static_cast<double>(tempi[i].second) / 1e6 / ppq;
  }
  return s;
}

PerformedPart random_performance(std::mt19937& rng, int ppq) {
  PerformedPart perf;
  perf.ppq = ppq;
  const double tick_sec = 0.5 / ppq;  // 120 bpm
  // same (channel, pitch) never overlaps or shares an onset: pairing would be ambiguous
  std::vector<std::tuple<std::int64_t, std::int64_t, int, int>> placed;
  while (placed.size() < 40) {
    std::int64_t on = rng() % (ppq * 16), len = 1 + rng() % (ppq * 2);
    int pitch = static_cast<int>(21 + rng() % 88), channel = static_cast<int>(rng() % 4);
    bool clash = std::any_of(placed.begin(), placed.end(), [&](const auto& q) {
      auto [o, l, p, c] = q;
      return (p == pitch && c == channel && on <= o + l && o <= on + len) || (p == pitch && o == on);
    });
    if (clash) continue;
    placed.emplace_back(on, len, pitch, channel);
    perf.add_note({"", static_cast<double>(on) * tick_sec, static_cast<double>(len) * tick_sec, pitch,
                   static_cast<int>(1 + rng() % 127), channel, 0});
  }
  for (int i = 0; i < 5; ++i)
    perf.add_control({static_cast<double>(rng() % (ppq * 16)) * tick_sec, 0, 64, static_cast<int>(rng() % 128)});
  perf.freeze();
  return perf;
}

}  // namespace

TEST(TempoMap, MatchesPiecewiseOracle) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    int ppq = 24 * (1 + static_cast<int>(rng() % 40));
    std::vector<std::pair<std::int64_t, std::int64_t>> tempi{{0, 500000}};
    TempoMap map(ppq);
    std::int64_t t = 0;
    for (int k = 0; k < 5; ++k) {
      t += 1 + rng() % (4 * ppq);
      std::int64_t us = 200000 + rng() % 800000;
      tempi.push_back({t, us});
      map.add(t, us);
    }
    for (int probe = 0; probe < 50; ++probe) {
      std::int64_t tick = rng() % (t + 4 * ppq);
      double expect = oracle_seconds(tick, ppq, tempi);
      EXPECT_NEAR(map.tick_to_seconds(tick), expect, 1e-9);
      EXPECT_LE(std::llabs(map.seconds_to_tick(expect) - tick), 1);
    }
  }
}

TEST(TempoMap, LaterEntryAtSameTickWins) {
  TempoMap map(480);
  map.add(480, 250000);
  map.add(480, 1000000);
  EXPECT_NEAR(map.tick_to_seconds(960), 0.5 + 1.0, 1e-12);
}

TEST(MidiPerformance, TwoTempoFixture) {
  auto result = load_performance_midi(read_file(data("two_tempo.mid")));
  const auto& notes = result.performance.notes();
  ASSERT_EQ(notes.size(), 3u);
  // ticks 0, 480, 960 under 500000 us/q then 250000 us/q from tick 480
  EXPECT_NEAR(notes[0].onset_sec, 0.0, 1e-9);
  EXPECT_NEAR(notes[1].onset_sec, 0.5, 1e-9);
  EXPECT_NEAR(notes[2].onset_sec, 0.75, 1e-9);
  EXPECT_NEAR(notes[2].duration_sec, 0.25, 1e-9);
  EXPECT_EQ(result.performance.ppq, 480);
}

TEST(MidiPerformance, RoundTripWithinOneTick) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    int ppq = trial % 2 ? 480 : 96;
    PerformedPart perf = random_performance(rng, ppq);
    auto again = load_performance_midi(save_midi(perf)).performance;
    ASSERT_EQ(again.notes().size(), perf.notes().size());
    const double tick = 0.5 / ppq;
    for (std::size_t i = 0; i < perf.notes().size(); ++i) {
      const auto& a = perf.notes()[i];
      const auto& b = again.notes()[i];
      EXPECT_EQ(a.midi_pitch, b.midi_pitch);
      EXPECT_EQ(a.velocity, b.velocity);
      EXPECT_EQ(a.channel, b.channel);
      EXPECT_LE(std::abs(a.onset_sec - b.onset_sec), tick + 1e-12);
      EXPECT_LE(std::abs(a.offset_sec() - b.offset_sec()), tick + 1e-12);
    }
    ASSERT_EQ(again.controls().size(), perf.controls().size());
    for (std::size_t i = 0; i < perf.controls().size(); ++i)
      EXPECT_EQ(again.controls()[i].value, perf.controls()[i].value);
  }
}

TEST(MidiPerformance, EncodeErrors) {
  auto category = [](PerformedPart perf) {
    perf.freeze();
    try {
      save_midi(perf);
    } catch (const Error& e) {
      return e.category();
    }
    return ErrorCategory::io;
  };
  PerformedPart channel;
  channel.add_note({"a", 0, 1, 60, 64, 16, 0});
  EXPECT_EQ(category(channel), ErrorCategory::encode);
  PerformedPart ppq;
  ppq.ppq = 40000;
  ppq.add_note({"a", 0, 1, 60, 64, 0, 0});
  EXPECT_EQ(category(ppq), ErrorCategory::encode);
  PerformedPart pitch;
  EXPECT_THROW(pitch.add_note({"a", 0, 1, 130, 64, 0, 0}), Error);
}

TEST(MidiPerformance, TruncatedFileIsParseError) {
  std::string bytes = read_file(data("two_tempo.mid"));
  EXPECT_THROW(load_performance_midi(bytes.substr(0, bytes.size() - 9)), ParseError);
  EXPECT_THROW(load_performance_midi(std::string("MThd\0\0\0\6", 8)), ParseError);
}

TEST(MidiScore, QuantizedReading) {
  auto doc = load_score(read_file(data("two_tempo.mid")));
  ASSERT_EQ(doc.parts().size(), 1u);
  const Part& p = *doc.parts().front();
  EXPECT_EQ(p.divs_per_quarter_at(0), 480);
  auto arr = note_array(p);
  ASSERT_EQ(arr.size(), 3u);
  EXPECT_EQ(arr.records[2].onset_quarter, Rational(2));
  EXPECT_EQ(arr.records[1].pitch, 62);
  // tempo changes become tempo directives
  EXPECT_EQ(p.objects_of<Directive>().size(), 2u);
}

TEST(MidiScore, ScoreSurvivesMidiExport) {
  for (const char* name : {"minimal.musicxml", "two_part.musicxml", "scale.krn", "divisions_change.musicxml"}) {
    auto doc = testing_support::load(name);
    auto again = load_score(save_midi(doc));
    auto a = note_array(doc), b = note_array(again);
    ASSERT_EQ(a.size(), b.size()) << name;
    std::multiset<std::pair<Rational, int>> x, y;
    for (const auto& r : a.records) x.insert({r.onset_quarter, r.pitch});
    for (const auto& r : b.records) y.insert({r.onset_quarter, r.pitch});
    EXPECT_EQ(x, y) << name;
  }
}
