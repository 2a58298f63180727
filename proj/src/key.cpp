#include <cmath>
#include <numeric>

#include "scoreline/analysis.hpp"
#include "scoreline/errors.hpp"

namespace scoreline {

const KeyProfiles& krumhansl_kessler_profiles() {
  static const KeyProfiles profiles{
      {6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88},
      {6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17},
  };
  return profiles;
}

std::string key_name(int tonic, Mode mode) {
  static const char* major[] = {"C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"};
  static const char* minor[] = {"Cm", "C#m", "Dm", "D#m", "Em", "Fm", "F#m", "Gm", "G#m", "Am", "Bbm", "Bm"};
  int t = ((tonic % 12) + 12) % 12;
  return mode == Mode::major ? major[t] : minor[t];
}

int key_fifths(int tonic, Mode mode) {
  int t = ((tonic % 12) + 12) % 12;
  if (mode == Mode::minor) t = (t + 3) % 12;
  int f = (t * 7) % 12;
  return f > 6 ? f - 12 : f;
}

PitchClassProfile pitch_class_distribution(const NoteArray& notes) {
  PitchClassProfile dist{};
  for (const auto& r : notes.records) {
    double w = notes.kind == NoteArray::Kind::score ? to_double(r.duration_quarter) : r.duration_sec;
    dist[static_cast<std::size_t>(((r.pitch % 12) + 12) % 12)] += w;
  }
  return dist;
}

namespace {

double pearson(const PitchClassProfile& x, const PitchClassProfile& y, int rotation) {
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / 12;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / 12;
  double sxy = 0, sxx = 0, syy = 0;
  for (int pc = 0; pc < 12; ++pc) {
    double a = x[static_cast<std::size_t>(pc)] - mx;
    double b = y[static_cast<std::size_t>((pc - rotation + 12) % 12)] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

KeyEstimate estimate_key_profile(const PitchClassProfile& distribution, const KeyProfiles& profiles) {
  double total = std::accumulate(distribution.begin(), distribution.end(), 0.0);
  if (total <= 0) throw Error(ErrorCategory::empty_input, "no sounding notes to estimate a key from");
  bool constant = true;
  for (double v : distribution) constant = constant && v == distribution[0];
  if (constant) throw Error(ErrorCategory::degeneracy, "pitch-class distribution is constant");

  KeyEstimate best;
  best.correlation = -2;
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (Mode mode : {Mode::major, Mode::minor}) {
      double r = pearson(distribution, mode == Mode::major ? profiles.major : profiles.minor, tonic);
      if (r > best.correlation) best = {tonic, mode, r};
    }
  }
  return best;
}

std::string estimate_key(const NoteArray& notes, const KeyProfiles& profiles) {
  if (notes.empty()) throw Error(ErrorCategory::empty_input, "no notes to estimate a key from");
  KeyEstimate k = estimate_key_profile(pitch_class_distribution(notes), profiles);
  return key_name(k.tonic, k.mode);
}

std::string estimate_key(const Part& part) { return estimate_key(note_array(part)); }

std::string estimate_key(const PerformedPart& performance) { return estimate_key(note_array(performance)); }

}  // namespace scoreline
