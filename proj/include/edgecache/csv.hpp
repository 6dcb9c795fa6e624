#pragma once

#include <cstdio>
#include <string>

namespace edgecache {

/// 17 significant digits: enough for any double to parse back bit-exactly.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace edgecache
