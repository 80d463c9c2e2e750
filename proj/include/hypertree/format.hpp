#pragma once

#include <cstdio>
#include <string>

namespace hypertree {

/// Shortest-stable rendering: 17 significant digits, which round-trips any
/// double exactly through strtod.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace hypertree
