#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace crs {

/// Replaces every "{name}" with vars[name]. Unknown placeholders are left as-is.
std::string format_template(std::string_view pattern, const std::map<std::string, std::string>& vars);

std::string capitalize_first(std::string s);
/// "x", "x and y", "x, y and z".
std::string join_and(const std::vector<std::string>& items);
/// Appends a period unless the text already ends with terminal punctuation.
std::string as_sentence(std::string s);
/// Placeholders referenced by a pattern, in order of first appearance.
std::vector<std::string> placeholders(std::string_view pattern);

}  // namespace crs
