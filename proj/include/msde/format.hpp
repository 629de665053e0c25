#pragma once

#include <cstdio>
#include <string>

namespace msde {

/// Round-trip decimal representation used in every CSV the library writes.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace msde
