#pragma once

#include "kktleak/error.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

namespace kktleak::detail {

inline std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

/// Non-empty lines with trailing whitespace removed.
inline std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  for (std::string& l : split(text, '\n')) {
    if (!l.empty()) out.push_back(std::move(l));
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("cannot parse " + what + " '" + s + "' as a number");
  }
  return x;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("cannot parse " + what + " '" + s + "' as an integer");
  }
  return static_cast<std::int64_t>(x);
}

}  // namespace kktleak::detail
