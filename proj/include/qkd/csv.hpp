#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace qkd {

// 17 significant digits, '.' decimal point, no separators: enough to
// round-trip a double bit-exactly.
inline std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_num(long double v) { return csv_num(static_cast<double>(v)); }

inline std::string csv_num(unsigned long v) { return std::to_string(v); }
inline std::string csv_num(unsigned long long v) { return std::to_string(v); }
inline std::string csv_num(unsigned v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) row += ',';
        row += fields[i];
    }
    row += '\n';
    return row;
}

}  // namespace qkd
