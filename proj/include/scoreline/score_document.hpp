#pragma once

#include <string>
#include <vector>

#include "scoreline/model.hpp"

namespace scoreline {

enum class SourceFormat { musicxml, kern, mei, midi, match };

const char* to_string(SourceFormat f) noexcept;

struct Warning {
  std::string location;
  std::string message;
};

struct ScoreDocument {
  PartGroup root;
  SourceFormat source_format = SourceFormat::musicxml;
  std::vector<Warning> warnings;

  std::vector<const Part*> parts() const { return root.parts(); }
};

struct LoadOptions {
  /// Turn every skip-warning into a parse error.
  bool strict = false;
};

}  // namespace scoreline
