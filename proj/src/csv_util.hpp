#pragma once

// Internal CSV helpers shared by the file-format parsers. Not installed.

#include "ritzfit/core.hpp"

#include <string>
#include <vector>

namespace ritzfit::detail {

std::string trim(const std::string& s);

/// Splits one CSV line on commas. No quoting support; the toolkit's formats
/// never quote fields.
std::vector<std::string> split_csv(const std::string& line);

/// strtod with full-token validation. `what` and `line_no` feed the error
/// message ("budget value", line 3).
double parse_double(const std::string& token, const std::string& what, int line_no);

long parse_long(const std::string& token, const std::string& what, int line_no);

/// Formats a double with `decimals` fractional digits, trailing zeros
/// trimmed but at least one decimal kept ("8.0", "0.75").
std::string format_trimmed(double value, int decimals);

}  // namespace ritzfit::detail
