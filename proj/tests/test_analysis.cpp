#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <tuple>

#include "oracles.hpp"
#include "support.hpp"

using namespace scoreline;
using testing_support::make_part;
using testing_support::NoteSpec;
using testing_support::scale_part;

namespace {

std::vector<std::tuple<char, int, int>> flat(const std::vector<SpelledPitch>& s) {
  std::vector<std::tuple<char, int, int>> out;
  for (const auto& p : s) out.emplace_back(p.step, p.alter, p.octave);
  return out;
}

std::array<double, 12> histogram(const Part& p) {
  std::array<double, 12> h{};
  for (const auto& n : p.objects_of<Note>()) h[static_cast<std::size_t>(n->midi_pitch % 12)] += static_cast<double>(n.end - n.start);
  return h;
}

}  // namespace

TEST(Key, NamesAndFifths) {
  EXPECT_EQ(key_name(0, Mode::major), "C");
  EXPECT_EQ(key_name(0, Mode::minor), "Cm");
  EXPECT_EQ(key_name(6, Mode::minor), "F#m");
  EXPECT_EQ(key_name(10, Mode::major), "Bb");
  EXPECT_EQ(key_fifths(7, Mode::major), 1);
  EXPECT_EQ(key_fifths(5, Mode::major), -1);
  EXPECT_EQ(key_fifths(9, Mode::minor), 0);
  EXPECT_EQ(key_fifths(2, Mode::minor), -1);
}

TEST(Key, ScalesAgreeWithOracle) {
  for (int t = 0; t < 12; ++t)
    for (Mode m : {Mode::major, Mode::minor}) {
      Part p = scale_part(t, m);
      std::string got = estimate_key(p);
      EXPECT_EQ(got, key_name(t, m));
      EXPECT_EQ(got, oracle::key(histogram(p)));
    }
}

TEST(Key, RotationEquivarianceAndScaleInvariance) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    PitchClassProfile d;
    for (auto& v : d) v = u(rng) * u(rng);
    KeyEstimate base = estimate_key_profile(d);
    EXPECT_EQ(key_name(base.tonic, base.mode), oracle::key(d));
    int s = static_cast<int>(rng() % 12);
    PitchClassProfile rotated, scaled;
    for (int k = 0; k < 12; ++k) {
      rotated[static_cast<std::size_t>((k + s) % 12)] = d[static_cast<std::size_t>(k)];
      scaled[static_cast<std::size_t>(k)] = d[static_cast<std::size_t>(k)] * 3.5;
    }
    KeyEstimate r = estimate_key_profile(rotated);
    EXPECT_EQ(r.tonic, (base.tonic + s) % 12);
    EXPECT_EQ(r.mode, base.mode);
    KeyEstimate sc = estimate_key_profile(scaled);
    EXPECT_EQ(sc.tonic, base.tonic);
    EXPECT_EQ(sc.mode, base.mode);
  }
}

TEST(Key, DegenerateInputs) {
  std::vector<NoteSpec> chromatic;
  for (int k = 0; k < 12; ++k) chromatic.push_back({k, 1, 60 + k});
  try {
    estimate_key(make_part(chromatic));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::degeneracy);
  }
  try {
    estimate_key(make_part({}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::empty_input);
  }
}

TEST(Key, TransposedScale) {
  EXPECT_EQ(estimate_key(scale_part(7, Mode::major)), "G");
  EXPECT_EQ(estimate_key(note_array(testing_support::load("scale.krn"))), "G");
}

TEST(Spelling, Examples) {
  auto one = estimate_spelling(std::vector<int>{60});
  EXPECT_EQ(flat(one), (std::vector<std::tuple<char, int, int>>{{'C', 0, 4}}));
  auto d_major = estimate_spelling(std::vector<int>{62, 64, 66, 67, 69, 71, 73, 74});
  EXPECT_EQ(d_major[2].step, 'F');
  EXPECT_EQ(d_major[2].alter, 1);
  EXPECT_EQ(d_major[6].step, 'C');
  EXPECT_EQ(d_major[6].alter, 1);
  EXPECT_THROW(estimate_spelling(std::vector<int>{60}, {-1, 4}), Error);
}

TEST(Spelling, MatchesOracleOnRandomSequences) {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> pitches(1 + rng() % 60);
    for (auto& p : pitches) p = static_cast<int>(30 + rng() % 70);
    int k_pre = static_cast<int>(rng() % 12), k_post = static_cast<int>(1 + rng() % 50);
    EXPECT_EQ(flat(estimate_spelling(pitches, {k_pre, k_post})), oracle::spell(pitches, k_pre, k_post));
  }
}

TEST(Spelling, OctaveShiftOnlyMovesOctaves) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> pitches(1 + rng() % 40), shifted;
    for (auto& p : pitches) p = static_cast<int>(36 + rng() % 48);
    int octaves = static_cast<int>(rng() % 3) - 1;
    for (int p : pitches) shifted.push_back(p + 12 * octaves);
    auto a = estimate_spelling(pitches), b = estimate_spelling(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].step, b[i].step);
      EXPECT_EQ(a[i].alter, b[i].alter);
      EXPECT_EQ(a[i].octave + octaves, b[i].octave);
      EXPECT_EQ(midi_pitch(b[i].step, b[i].alter, b[i].octave), shifted[i]);
    }
  }
}

TEST(Voices, Examples) {
  auto mono = estimate_voices(make_part({{0, 1, 60}, {1, 1, 72}, {2, 2, 55}, {4, 1, 61}}));
  EXPECT_EQ(mono, (std::vector<int>{1, 1, 1, 1}));
  auto chord = estimate_voices(make_part({{0, 2, 60}, {0, 2, 64}, {0, 2, 67}}));
  // notes_sorted order is ascending pitch
  EXPECT_EQ(chord, (std::vector<int>{3, 2, 1}));
  auto parallel = estimate_voices(make_part({{0, 1, 72}, {0, 1, 48}, {1, 1, 74}, {1, 1, 50}, {2, 1, 76}, {2, 1, 52}}));
  EXPECT_EQ(parallel, (std::vector<int>{2, 1, 2, 1, 2, 1}));
  EXPECT_TRUE(separate_voices({}).voices.empty());
}

TEST(Voices, TwoInterleavedLines) {
  auto doc = testing_support::load("two_lines.krn");
  auto arr = note_array(doc);
  auto voices = estimate_voices(arr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    // the fixture keeps the upper line at or above B4 and the lower at or below A3
    int expected = arr.records[i].pitch >= 71 ? 1 : 2;
    EXPECT_EQ(voices[i], expected) << arr.records[i].id;
  }
}

TEST(Voices, OverlappingNotesFollowPitchOrder) {
  std::mt19937 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<VoiceInput> notes;
    while (notes.size() < 30) {
      VoiceInput n{static_cast<std::int64_t>(rng() % 40), 0, static_cast<int>(40 + rng() % 40)};
      n.offset = n.onset + 1 + static_cast<std::int64_t>(rng() % 6);
      bool unison = std::any_of(notes.begin(), notes.end(), [&](const VoiceInput& m) {
        return m.pitch == n.pitch && m.onset < n.offset && n.onset < m.offset;
      });
      if (!unison) notes.push_back(n);
    }
    auto result = separate_voices(notes);
    ASSERT_EQ(result.voices.size(), notes.size());
    for (std::size_t a = 0; a < notes.size(); ++a) {
      EXPECT_GE(result.voices[a], 1);
      EXPECT_LE(result.voices[a], result.voice_count);
      for (std::size_t b = 0; b < notes.size(); ++b) {
        bool overlap = notes[a].onset < notes[b].offset && notes[b].onset < notes[a].offset;
        if (a == b || !overlap || notes[a].pitch <= notes[b].pitch) continue;
        EXPECT_LT(result.voices[a], result.voices[b]) << "trial " << trial;
      }
    }
    // contigs report their notes highest first
    for (const auto& c : result.contigs)
      for (std::size_t k = 1; k < c.notes.size(); ++k)
        EXPECT_GT(notes[c.notes[k - 1]].pitch, notes[c.notes[k]].pitch);
    EXPECT_EQ(separate_voices(notes).voices, result.voices);
  }
}
