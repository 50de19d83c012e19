#pragma once
// Number <-> text helpers. Doubles are printed with the shortest
// representation that round-trips exactly, so emitted files are byte-stable
// across runs and re-parsing loses nothing.

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

#include "pgnn/errors.hpp"

namespace pgnn::fmt {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ValidationError("not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ValidationError("not a non-negative integer: '" + s + "'");
  return v;
}

}  // namespace pgnn::fmt
