#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "scoreline/score_document.hpp"

namespace scoreline {

/// Format guessed from the leading bytes: `MThd` (MIDI), an XML root element
/// `score-partwise` (MusicXML) or `mei` (MEI), or a `**kern` spine token.
/// Throws format-detection error listing the attempted signatures.
SourceFormat sniff_format(std::string_view bytes);

ScoreDocument load_score(std::string_view bytes, const LoadOptions& options = {});
ScoreDocument load_score_file(const std::filesystem::path& path, const LoadOptions& options = {});

ScoreDocument load_musicxml(std::string_view document, const LoadOptions& options = {});
ScoreDocument load_kern(std::string_view document, const LoadOptions& options = {});
ScoreDocument load_mei(std::string_view document, const LoadOptions& options = {});

/// Partwise MusicXML covering the supported element subset. Notes that cross
/// a measure boundary are split into tied pieces.
void save_musicxml(const ScoreDocument& doc, std::ostream& sink);
std::string save_musicxml(const ScoreDocument& doc);

/// Reads a whole file into memory; throws io error.
std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename; throws io error.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace scoreline
