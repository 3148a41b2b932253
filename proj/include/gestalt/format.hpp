// format.hpp -- locale-independent number formatting.
//
// Every number written to a file goes through round_sig12 first, so that
// print(parse(print(x))) == print(x) and generated data survives a trip
// through JSON unchanged.
#pragma once

#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace gestalt {

inline constexpr int kSignificantDigits = 12;

inline std::string format_sig12(double v) {
  if (!std::isfinite(v)) throw std::domain_error("cannot format a non-finite number");
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, kSignificantDigits);
  if (r.ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

/// Nearest double to the 12-significant-digit decimal rendering of v.
inline double round_sig12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
  return parse_double(format_sig12(v));
}

/// round_sig12 for orientations; keeps the result in [0, pi).
inline double round_angle12(double theta) {
  double r = round_sig12(theta);
  if (r >= std::numbers::pi) r = round_sig12(r - std::numbers::pi);
  if (r < 0.0) r = 0.0;
  return r;
}

}  // namespace gestalt
