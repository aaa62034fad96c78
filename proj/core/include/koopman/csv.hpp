#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace koopman::csv {

// Shortest decimal text that parses back to exactly the same double.
std::string format(double v);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

// Parses a full field as a double; false when the text is not a number.
bool parse(std::string_view field, double& out);

std::string_view trim(std::string_view s);

}  // namespace koopman::csv
