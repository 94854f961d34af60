#pragma once

// Small string helpers shared by the CSV/header readers.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "airway_crowd/errors.hpp"

namespace airway_crowd::text {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Whitespace-separated tokens, empty tokens dropped.
inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw FormatError("invalid number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  std::int64_t value = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw FormatError("invalid integer for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// 64-bit FNV-1a; stable across platforms, used for seeding and content tags.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace airway_crowd::text
