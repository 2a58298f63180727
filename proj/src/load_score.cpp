#include <atomic>
#include <fstream>
#include <sstream>

#include "scoreline/errors.hpp"
#include "scoreline/io_midi.hpp"
#include "scoreline/io_score.hpp"
#include "xml.hpp"

namespace scoreline {

const char* to_string(SourceFormat f) noexcept {
  switch (f) {
    case SourceFormat::musicxml: return "musicxml";
    case SourceFormat::kern: return "kern";
    case SourceFormat::mei: return "mei";
    case SourceFormat::midi: return "midi";
    case SourceFormat::match: return "match";
  }
  return "unknown";
}

namespace {

bool has_kern_spine(std::string_view bytes) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto eol = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    if (line.empty() || line.starts_with("!!")) continue;
    return line.starts_with("**") && line.find("**kern") != std::string_view::npos;
  }
  return false;
}

}  // namespace

SourceFormat sniff_format(std::string_view bytes) {
  if (bytes.starts_with("MThd")) return SourceFormat::midi;
  if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);
  auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && bytes[first] == '<') {
    std::string root = xml::root_name(bytes);
    if (root == "score-partwise") return SourceFormat::musicxml;
    if (root == "mei") return SourceFormat::mei;
    throw Error(ErrorCategory::format_detection,
                "unrecognized XML root '" + root + "' (tried score-partwise, mei)");
  }
  if (has_kern_spine(bytes)) return SourceFormat::kern;
  throw Error(ErrorCategory::format_detection,
              "unrecognized input (tried MThd magic, XML root score-partwise/mei, **kern spine)");
}

ScoreDocument load_score(std::string_view bytes, const LoadOptions& options) {
  switch (sniff_format(bytes)) {
    case SourceFormat::musicxml: return load_musicxml(bytes, options);
    case SourceFormat::mei: return load_mei(bytes, options);
    case SourceFormat::kern: return load_kern(bytes, options);
    case SourceFormat::midi: return load_score_midi(bytes, options);
    case SourceFormat::match: break;
  }
  throw Error(ErrorCategory::format_detection, "unsupported score format");
}

ScoreDocument load_score_file(const std::filesystem::path& path, const LoadOptions& options) {
  std::string bytes = read_file(path);
  try {
    return load_score(bytes, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.bare_message(), e.line(), e.column());
  } catch (const Error& e) {
    throw Error(e.category(), path.string() + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCategory::io, "cannot read " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCategory::io, "write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCategory::io, "cannot replace " + path.string());
  }
}

}  // namespace scoreline
