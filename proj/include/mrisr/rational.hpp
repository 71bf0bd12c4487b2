#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "mrisr/errors.hpp"

namespace mrisr {

/// Exact rational number, always kept in lowest terms with a positive
/// denominator.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Parses "p/q", "-p/q" or "p". Whitespace around the tokens is ignored.
inline Rational parse_rational(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  };
  auto parse_int = [&](std::string_view s) -> BigInt {
    s = trim(s);
    if (s.empty()) throw FormatError("empty integer in fraction '" + std::string(text) + "'");
    std::size_t start = (s.front() == '-' || s.front() == '+') ? 1 : 0;
    if (start == s.size()) throw FormatError("malformed fraction '" + std::string(text) + "'");
    for (std::size_t i = start; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9')
        throw FormatError("malformed fraction '" + std::string(text) + "'");
    }
    if (s.front() == '+') s.remove_prefix(1);
    return BigInt(std::string(s));
  };

  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(text));
  BigInt num = parse_int(text.substr(0, slash));
  BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw FormatError("zero denominator in '" + std::string(text) + "'");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  return Rational(num, den);
}

inline Rational frac(long long p, long long q = 1) { return Rational(BigInt(p), BigInt(q)); }

/// Lossless "p/q" (or "p" for integers).
inline std::string to_string(const Rational& r) {
  const BigInt& d = boost::multiprecision::denominator(r);
  if (d == 1) return boost::multiprecision::numerator(r).str();
  return boost::multiprecision::numerator(r).str() + "/" + d.str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline Rational abs(const Rational& r) { return r < 0 ? Rational(-r) : r; }

inline std::vector<double> to_double(const std::vector<Rational>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(to_double(x));
  return out;
}

namespace detail {

inline std::vector<Rational> rational_row(std::initializer_list<const char*> row) {
  std::vector<Rational> v;
  for (const char* x : row) v.push_back(parse_rational(x));
  return v;
}

}  // namespace detail

}  // namespace mrisr
