#pragma once

#include <charconv>
#include <string>

namespace aispo {

/// Shortest decimal string that parses back to exactly `x` ("0.7", "1e-09",
/// "-inf"). Every CSV and TOML writer uses it, so outputs are byte-stable.
inline std::string format_real(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace aispo
