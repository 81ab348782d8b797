#pragma once

#include <cstdio>
#include <string>

namespace red {

/// 17 significant digits: enough for every double to round-trip exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace red
