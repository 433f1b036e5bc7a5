#pragma once

#include <string>

namespace capmscm {

/// Twelve significant digits, "%.12g" style; -0 prints as 0 and non-finite
/// values as an empty string.
std::string format_number(double value);

/// Shortest text that parses back to the same double.
std::string format_exact(double value);

} // namespace capmscm
