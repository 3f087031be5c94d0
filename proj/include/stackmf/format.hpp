#pragma once

#include <string>
#include <string_view>

namespace stackmf {

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// Strict parse of a complete decimal field; throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace stackmf
