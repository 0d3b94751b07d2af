#pragma once

#include <charconv>
#include <string>

namespace aoii {

// Shortest decimal form that parses back to the identical double; CSV and
// JSON outputs stay byte-stable and lossless.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace aoii
