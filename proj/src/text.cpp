#include "crs/text.hpp"

#include <algorithm>
#include <cctype>

namespace crs {

std::string format_template(std::string_view pattern, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(pattern.size() + 32);
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      auto close = pattern.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string name(pattern.substr(i + 1, close - i - 1));
        if (auto it = vars.find(name); it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += pattern[i++];
  }
  return out;
}

std::string capitalize_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string join_and(const std::vector<std::string>& items) {
  if (items.empty()) return {};
  if (items.size() == 1) return items.front();
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += items[i];
  }
  return out + " and " + items.back();
}

std::string as_sentence(std::string s) {
  if (s.empty()) return s;
  char last = s.back();
  if (last != '.' && last != '?' && last != '!') s += '.';
  return s;
}

std::vector<std::string> placeholders(std::string_view pattern) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while ((i = pattern.find('{', i)) != std::string_view::npos) {
    auto close = pattern.find('}', i + 1);
    if (close == std::string_view::npos) break;
    std::string name(pattern.substr(i + 1, close - i - 1));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    i = close + 1;
  }
  return out;
}

}  // namespace crs
