#include "capmscm/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace capmscm {

std::string format_number(double value) {
    if (!std::isfinite(value)) return {};
    if (value == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::string format_exact(double value) {
    if (!std::isfinite(value)) return {};
    if (value == 0.0) return "0";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

} // namespace capmscm
