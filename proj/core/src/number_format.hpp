#pragma once

#include <charconv>
#include <cstdlib>
#include <string>

namespace lvfuse::detail {

// Shortest decimal that round-trips the float ("0.1", not 0.100000001).
inline std::string shortest(float v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// The double closest to the float's shortest decimal, for JSON output.
inline double as_decimal(float v) { return std::strtod(shortest(v).c_str(), nullptr); }

}  // namespace lvfuse::detail
