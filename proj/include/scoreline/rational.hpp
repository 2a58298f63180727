#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

// Under C++20 rewritten comparisons, boost's mixed-type rational == int
// recurses into itself. Exact-match overloads sidestep that template.
namespace boost {
inline bool operator==(const rational<std::int64_t>& a, std::int64_t b) {
  return a.denominator() == 1 && a.numerator() == b;
}
inline bool operator==(std::int64_t a, const rational<std::int64_t>& b) { return b == a; }
inline bool operator==(const rational<std::int64_t>& a, int b) { return a == static_cast<std::int64_t>(b); }
inline bool operator==(int a, const rational<std::int64_t>& b) { return b == static_cast<std::int64_t>(a); }
}  // namespace boost

namespace scoreline {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

/// floor/ceil for rationals (denominator is always positive after normalisation).
inline std::int64_t floor(const Rational& r) {
  auto q = r.numerator() / r.denominator();
  if (r.numerator() % r.denominator() != 0 && r.numerator() < 0) --q;
  return q;
}

inline std::int64_t ceil(const Rational& r) {
  auto q = r.numerator() / r.denominator();
  if (r.numerator() % r.denominator() != 0 && r.numerator() > 0) ++q;
  return q;
}

/// "n" for integers, "n/d" otherwise.
std::string format_rational(const Rational& r);

/// Accepts "n", "n/d" and finite decimals such as "-0.25".
Rational parse_rational(const std::string& text);

}  // namespace scoreline
