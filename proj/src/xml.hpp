#pragma once

// Minimal element tree over expat, used by the MusicXML and MEI readers.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scoreline::xml {

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::unique_ptr<Element>> children;
  std::string text;  // concatenated character data directly inside this element
  std::size_t line = 0;
  std::size_t column = 0;

  const std::string* attr(std::string_view key) const;
  std::string attr_or(std::string_view key, std::string fallback = {}) const;

  const Element* child(std::string_view name) const;
  std::vector<const Element*> children_named(std::string_view name) const;

  /// Trimmed text of the named child, if present.
  std::optional<std::string> child_text(std::string_view name) const;
};

/// Throws ParseError with expat's line/column on malformed input.
std::unique_ptr<Element> parse(std::string_view document);

/// Name of the first element, without building the tree (empty if none).
std::string root_name(std::string_view document);

std::string escape(std::string_view text);

std::string trim(std::string_view s);

}  // namespace scoreline::xml
