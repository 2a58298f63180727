#include <algorithm>
#include <array>
#include <cstdlib>

#include "scoreline/analysis.hpp"
#include "scoreline/errors.hpp"

namespace scoreline {

namespace {

// chroma (or chromatic interval) -> morph (or morphetic interval)
constexpr std::array<int, 12> kMorph = {0, 1, 1, 2, 2, 3, 4, 4, 5, 5, 6, 6};
constexpr std::array<int, 7> kNatural = {0, 2, 4, 5, 7, 9, 11};

int chroma(int pitch) { return ((pitch % 12) + 12) % 12; }

}  // namespace

char morph_letter(int morph) { return "CDEFGAB"[((morph % 7) + 7) % 7]; }

SpelledPitch spell_with_letter(int pitch, int morph) {
  int m = ((morph % 7) + 7) % 7;
  int natural = kNatural[static_cast<std::size_t>(m)];
  int d = chroma(pitch - natural);
  if (d > 6) d -= 12;
  SpelledPitch s;
  s.step = morph_letter(m);
  s.alter = d;
  s.octave = (pitch - d - natural) / 12 - 1;
  return s;
}

std::vector<SpelledPitch> estimate_spelling(const std::vector<int>& pitches, SpellingWindow window) {
  if (window.k_pre < 0 || window.k_post < 0) throw Error(ErrorCategory::range, "window sizes must be non-negative");
  const auto n = static_cast<long>(pitches.size());
  // prefix counts per chroma make each window O(12)
  std::vector<std::array<int, 12>> prefix(pitches.size() + 1);
  prefix[0].fill(0);
  for (std::size_t i = 0; i < pitches.size(); ++i) {
    prefix[i + 1] = prefix[i];
    ++prefix[i + 1][static_cast<std::size_t>(chroma(pitches[i]))];
  }

  std::vector<SpelledPitch> out;
  out.reserve(pitches.size());
  for (long i = 0; i < n; ++i) {
    long lo = std::max(0L, i - window.k_pre);
    long hi = std::min(n, i + window.k_post);
    int c = chroma(pitches[static_cast<std::size_t>(i)]);
    std::array<long, 7> strength{};
    for (int t = 0; t < 12; ++t) {
      long count = prefix[static_cast<std::size_t>(hi)][static_cast<std::size_t>(t)] -
                   prefix[static_cast<std::size_t>(lo)][static_cast<std::size_t>(t)];
      int morph = (kMorph[static_cast<std::size_t>(t)] + kMorph[static_cast<std::size_t>(chroma(c - t))]) % 7;
      strength[static_cast<std::size_t>(morph)] += count;
    }
    int best = -1;
    SpelledPitch best_spelling;
    for (int m = 0; m < 7; ++m) {
      SpelledPitch s = spell_with_letter(pitches[static_cast<std::size_t>(i)], m);
      if (best < 0) {
        best = m;
        best_spelling = s;
        continue;
      }
      long sm = strength[static_cast<std::size_t>(m)], sb = strength[static_cast<std::size_t>(best)];
      bool better = sm > sb || (sm == sb && (std::abs(s.alter) < std::abs(best_spelling.alter) ||
                                             (std::abs(s.alter) == std::abs(best_spelling.alter) && s.alter > best_spelling.alter)));
      if (better) {
        best = m;
        best_spelling = s;
      }
    }
    out.push_back(best_spelling);
  }
  return out;
}

std::vector<SpelledPitch> estimate_spelling(const NoteArray& notes, SpellingWindow window) {
  std::vector<int> pitches;
  pitches.reserve(notes.size());
  for (const auto& r : notes.records) pitches.push_back(r.pitch);
  return estimate_spelling(pitches, window);
}

std::vector<SpelledPitch> estimate_spelling(const Part& part, SpellingWindow window) {
  return estimate_spelling(note_array(part), window);
}

std::vector<SpelledPitch> estimate_spelling(const PerformedPart& performance, SpellingWindow window) {
  return estimate_spelling(note_array(performance), window);
}

}  // namespace scoreline
