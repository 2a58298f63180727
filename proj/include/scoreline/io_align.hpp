#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scoreline/model.hpp"
#include "scoreline/rational.hpp"
#include "scoreline/score_document.hpp"

namespace scoreline {

/// Score side of one `snote(...)` clause.
struct SNoteRecord {
  std::string id;
  char step = 'C';
  int alter = 0;
  int octave = 4;
  int measure = 1;
  int beat = 1;         // 1-based within the measure
  Rational offset;      // remainder within the beat, in beats
  Rational duration;    // in beats
  Rational onset_beat;  // absolute, beat origin at the first downbeat
  Rational offset_beat;
  std::vector<std::string> attributes;  // e.g. staff1, v1, grace

  friend bool operator==(const SNoteRecord&, const SNoteRecord&) = default;
};

struct MatchFile {
  std::vector<std::pair<std::string, std::string>> info;
  std::vector<SNoteRecord> snotes;  // one per score-side clause, file order
  PerformedPart performance;
  Alignment alignment;
  /// Present when time-signature info allows rebuilding a score.
  std::optional<ScoreDocument> score;

  const std::string* info_value(std::string_view key) const;
};

MatchFile load_match(std::string_view document);

/// Emits from parsed records; save(load(x)) reproduces x for files this
/// library wrote.
void save_match(const MatchFile& match, std::ostream& sink);
std::string save_match(const MatchFile& match);

/// Builds records from the score and performance, then emits. Throws identity
/// error for alignment ids that do not resolve.
void save_match(const Part& part, const PerformedPart& performance, const Alignment& alignment,
                std::ostream& sink);
std::string save_match(const Part& part, const PerformedPart& performance, const Alignment& alignment);

/// Tab-separated 10-column alignment (aligned = performance, reference = score).
Alignment load_corresp(std::string_view document);

}  // namespace scoreline
