#pragma once

#include <string>
#include <string_view>

namespace emnn {

// Shortest round-trip representation, always with '.' as decimal separator.
std::string fmt_double(double x);

// Fixed number of significant digits, locale independent.
std::string fmt_double(double x, int precision);

// Whole-string parse; throws std::invalid_argument on trailing garbage.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace emnn
