#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace bufnet::csv {

/// 12 significant digits, the format of every float this library writes.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) {
            os << ',';
        }
        os << cells[k];
    }
    os << '\n';
}

} // namespace bufnet::csv
