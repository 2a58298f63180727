#pragma once

// Shared assembly step for the notation readers: objects are collected at
// rational quarter positions, then laid onto an integer div grid whose
// resolution is the LCM of every denominator (and of an optional hint).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scoreline/errors.hpp"
#include "scoreline/model.hpp"
#include "scoreline/rational.hpp"
#include "scoreline/score_document.hpp"

namespace scoreline::detail {

class PartBuilder {
public:
  PartBuilder(std::string id, std::string name) : id_(std::move(id)), name_(std::move(name)) {}

  /// Returns the index of the note for slur references.
  std::size_t add_note(Note note, const Rational& start, const Rational& end);
  void add(ObjectData obj, const Rational& start, const Rational& end);
  void add_slur(std::size_t start_note, std::size_t end_note);

  /// Divs-per-quarter must be a multiple of this.
  void require_divs(std::int64_t divs);
  void set_staff_count(int n) { staff_count_ = std::max(staff_count_, n); }

  const std::string& id() const { return id_; }
  std::size_t note_count() const { return notes_.size(); }
  Note& note(std::size_t i) { return notes_[i].note; }
  const Rational& note_start(std::size_t i) const { return notes_[i].start; }
  const Rational& note_end(std::size_t i) const { return notes_[i].end; }

  /// Assigns "n{k}" ids (k = 1-based (onset, pitch) rank) to unnamed notes and
  /// "r{k}" to unnamed rests, then builds and freezes the Part.
  Part build() const;

private:
  struct PendingNote {
    Note note;
    Rational start, end;
  };
  struct PendingObject {
    ObjectData data;
    Rational start, end;
  };

  std::string id_;
  std::string name_;
  std::int64_t divs_hint_ = 1;
  int staff_count_ = 1;
  std::vector<PendingNote> notes_;
  std::vector<PendingObject> objects_;
  std::vector<std::pair<std::size_t, std::size_t>> slurs_;
};

/// Collects warnings or, in strict mode, throws them as parse errors.
class Diagnostics {
public:
  Diagnostics(const LoadOptions& options, std::vector<Warning>& sink) : options_(options), sink_(sink) {}

  void warn(const std::string& message, std::size_t line = 0, std::size_t column = 0);
  bool strict() const { return options_.strict; }

private:
  const LoadOptions& options_;
  std::vector<Warning>& sink_;
};

struct WordsMeaning {
  enum class Kind { navigation, tempo, loudness } kind = Kind::tempo;
  NavigationKind navigation = NavigationKind::fine;
  std::optional<double> bpm;
};

/// Interprets free text directions ("D.C. al Fine", "Allegro q=120", "cresc.").
WordsMeaning classify_words(const std::string& text);

/// Marks that are placed at the end of the measure they are written in.
bool is_measure_end_mark(NavigationKind k);

std::int64_t lcm(std::int64_t a, std::int64_t b);

}  // namespace scoreline::detail
