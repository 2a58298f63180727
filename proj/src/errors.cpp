#include "scoreline/errors.hpp"

#include <charconv>
#include <stdexcept>

#include "scoreline/rational.hpp"

namespace scoreline {

const char* to_string(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::range: return "range";
    case ErrorCategory::identity: return "identity";
    case ErrorCategory::missing_context: return "missing-context";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::format_detection: return "format-detection";
    case ErrorCategory::structure: return "structure";
    case ErrorCategory::degeneracy: return "degeneracy";
    case ErrorCategory::empty_input: return "empty-input";
    case ErrorCategory::encode: return "encode";
    case ErrorCategory::io: return "io";
    case ErrorCategory::feature: return "feature";
    case ErrorCategory::frozen: return "frozen";
  }
  return "unknown";
}

namespace {

std::string with_location(const std::string& message, std::size_t line, std::size_t column) {
  if (line == 0) return message;
  std::string out = "line " + std::to_string(line);
  if (column != 0) out += ", column " + std::to_string(column);
  return out + ": " + message;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : Error(ErrorCategory::parse, with_location(message, line, column)), line_(line), column_(column), bare_(message) {}

std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

Rational parse_rational(const std::string& text) {
  auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      throw ParseError("not a number: '" + text + "'");
    return v;
  };
  std::string_view s = text;
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto den = parse_int(s.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator: '" + text + "'");
    return Rational(parse_int(s.substr(0, slash)), den);
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    bool negative = !s.empty() && s.front() == '-';
    std::string_view whole = s.substr(0, dot);
    std::string_view frac = s.substr(dot + 1);
    if (frac.size() > 15) frac = frac.substr(0, 15);
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    std::int64_t w = (whole.empty() || whole == "-" || whole == "+") ? 0 : parse_int(whole);
    std::int64_t f = frac.empty() ? 0 : parse_int(frac);
    Rational r(std::abs(w) * scale + f, scale);
    return negative ? -r : r;
  }
  return Rational(parse_int(s));
}

}  // namespace scoreline
