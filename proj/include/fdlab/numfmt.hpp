#pragma once

#include <cstdio>
#include <string>

namespace fdlab {

// Fixed 17-significant-digit rendering: enough to round-trip any double, so
// identical runs produce byte-identical CSV/JSON output.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace fdlab
