#include "xml.hpp"

#include <expat.h>

#include "scoreline/errors.hpp"

namespace scoreline::xml {

const std::string* Element::attr(std::string_view key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

std::string Element::attr_or(std::string_view key, std::string fallback) const {
  const std::string* v = attr(key);
  return v ? *v : fallback;
}

const Element* Element::child(std::string_view child_name) const {
  for (const auto& c : children)
    if (c->name == child_name) return c.get();
  return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view child_name) const {
  std::vector<const Element*> out;
  for (const auto& c : children)
    if (c->name == child_name) out.push_back(c.get());
  return out;
}

std::optional<std::string> Element::child_text(std::string_view child_name) const {
  const Element* c = child(child_name);
  if (!c) return std::nullopt;
  return trim(c->text);
}

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

namespace {

struct Builder {
  XML_Parser parser = nullptr;
  std::unique_ptr<Element> root;
  std::vector<Element*> stack;
  bool stop_at_root = false;
  std::string first_name;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto* b = static_cast<Builder*>(data);
  if (b->stop_at_root) {
    b->first_name = name;
    XML_StopParser(b->parser, XML_FALSE);
    return;
  }
  auto el = std::make_unique<Element>();
  el->name = name;
  el->line = XML_GetCurrentLineNumber(b->parser);
  el->column = XML_GetCurrentColumnNumber(b->parser) + 1;
  for (int i = 0; atts[i]; i += 2) el->attributes.emplace_back(atts[i], atts[i + 1]);
  Element* raw = el.get();
  if (b->stack.empty()) {
    b->root = std::move(el);
  } else {
    b->stack.back()->children.push_back(std::move(el));
  }
  b->stack.push_back(raw);
}

void XMLCALL on_end(void* data, const XML_Char*) {
  auto* b = static_cast<Builder*>(data);
  if (!b->stack.empty()) b->stack.pop_back();
}

void XMLCALL on_text(void* data, const XML_Char* s, int len) {
  auto* b = static_cast<Builder*>(data);
  if (!b->stack.empty()) b->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace

std::unique_ptr<Element> parse(std::string_view document) {
  Builder b;
  b.parser = XML_ParserCreate("UTF-8");
  XML_SetUserData(b.parser, &b);
  XML_SetElementHandler(b.parser, on_start, on_end);
  XML_SetCharacterDataHandler(b.parser, on_text);
  auto status = XML_Parse(b.parser, document.data(), static_cast<int>(document.size()), XML_TRUE);
  if (status != XML_STATUS_OK) {
    std::string msg = std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(b.parser));
    auto line = XML_GetCurrentLineNumber(b.parser);
    auto col = XML_GetCurrentColumnNumber(b.parser) + 1;
    XML_ParserFree(b.parser);
    throw ParseError(msg, line, col);
  }
  XML_ParserFree(b.parser);
  if (!b.root) throw ParseError("XML document has no root element");
  return std::move(b.root);
}

std::string root_name(std::string_view document) {
  Builder b;
  b.stop_at_root = true;
  b.parser = XML_ParserCreate("UTF-8");
  XML_SetUserData(b.parser, &b);
  XML_SetElementHandler(b.parser, on_start, on_end);
  XML_Parse(b.parser, document.data(), static_cast<int>(document.size()), XML_TRUE);
  XML_ParserFree(b.parser);
  return b.first_name;
}

std::string escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace scoreline::xml
