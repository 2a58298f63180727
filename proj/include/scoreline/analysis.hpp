#pragma once

#include <array>
#include <string>
#include <vector>

#include "scoreline/features.hpp"
#include "scoreline/model.hpp"

namespace scoreline {

using PitchClassProfile = std::array<double, 12>;

struct KeyProfiles {
  PitchClassProfile major;
  PitchClassProfile minor;
};

/// Krumhansl-Kessler probe-tone profiles (tonic at index 0).
const KeyProfiles& krumhansl_kessler_profiles();

struct KeyEstimate {
  int tonic = 0;  // pitch class
  Mode mode = Mode::major;
  double correlation = 0;
};

/// "C", "F#", "Bbm", ...
std::string key_name(int tonic, Mode mode);
/// Fifths of the key signature for this tonic/mode, in [-7, 7] preferring fewer accidentals.
int key_fifths(int tonic, Mode mode);

/// Duration-weighted pitch-class histogram; quarters for scores, seconds for performances.
PitchClassProfile pitch_class_distribution(const NoteArray& notes);

/// Pearson correlation against the 24 rotated profiles; arg-max with ties to
/// the lower tonic, then major. Throws empty-input or degeneracy error.
KeyEstimate estimate_key_profile(const PitchClassProfile& distribution,
                                 const KeyProfiles& profiles = krumhansl_kessler_profiles());

std::string estimate_key(const NoteArray& notes, const KeyProfiles& profiles = krumhansl_kessler_profiles());
std::string estimate_key(const Part& part);
std::string estimate_key(const PerformedPart& performance);

struct SpelledPitch {
  char step = 'C';
  int alter = 0;
  int octave = 4;

  friend bool operator==(const SpelledPitch&, const SpelledPitch&) = default;
};

/// Letter (0=C .. 6=B) and natural semitone helpers.
char morph_letter(int morph);

/// The spelling of `pitch` with the given letter, octave chosen so |alter| <= 6.
SpelledPitch spell_with_letter(int pitch, int morph);

struct SpellingWindow {
  int k_pre = 10;
  int k_post = 42;
};

/// ps13 stage 1 over a pitch sequence already in onset-then-pitch order.
std::vector<SpelledPitch> estimate_spelling(const std::vector<int>& pitches, SpellingWindow window = {});
/// One spelling per note, in the array's order.
std::vector<SpelledPitch> estimate_spelling(const NoteArray& notes, SpellingWindow window = {});
std::vector<SpelledPitch> estimate_spelling(const Part& part, SpellingWindow window = {});
std::vector<SpelledPitch> estimate_spelling(const PerformedPart& performance, SpellingWindow window = {});

/// Interval on a time grid, pitch, for voice separation.
struct VoiceInput {
  std::int64_t onset;
  std::int64_t offset;
  int pitch;
};

struct Contig {
  std::int64_t start;
  std::int64_t end;
  /// Notes sounding in the contig, highest pitch first (rank r = index+1).
  std::vector<std::size_t> notes;
};

struct VoiceSeparation {
  std::vector<int> voices;  // per input note, 1 = highest mean pitch
  std::vector<Contig> contigs;
  int voice_count = 0;
};

VoiceSeparation separate_voices(const std::vector<VoiceInput>& notes);

/// Voice per record of the array (in array order).
std::vector<int> estimate_voices(const NoteArray& notes);
/// Voice per note of notes_sorted(part).
std::vector<int> estimate_voices(const Part& part);

}  // namespace scoreline
