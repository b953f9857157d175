#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace runvar::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
/// ASCII casefold, trim, and collapse internal whitespace runs to one space.
std::string normalize(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

}  // namespace runvar::text
