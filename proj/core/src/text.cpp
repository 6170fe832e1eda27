#include "dataloop/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace dataloop::text {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 3> kArticles = {"the ", "a ", "an "};

constexpr std::array<std::string_view, 40> kStopwords = {
    "a",    "an",   "the",  "of",   "in",   "on",   "to",    "and",  "or",   "for",
    "by",   "with", "is",   "are",  "was",  "were", "be",    "as",   "at",   "from",
    "that", "this", "it",   "its",  "into", "than", "then",  "which", "their", "these",
    "those", "has", "have", "had",  "not",  "but",  "such",  "can",  "via",  "per"};

std::string strip_article(std::string s) {
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (const auto article : kArticles) {
      if (s.size() > article.size() && starts_with_ci(s, article)) {
        s.erase(0, article.size());
        stripped = true;
        break;
      }
    }
  }
  return s;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (const char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_term(std::string_view s) { return strip_article(to_lower(collapse_whitespace(s))); }

std::string tidy_term(std::string_view s) { return strip_article(collapse_whitespace(s)); }

std::vector<std::string> whitespace_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(to_lower(s.substr(start, i - start)));
  }
  return out;
}

std::vector<std::string> content_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_alnum(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && is_alnum(s[i])) ++i;
    if (i == start) continue;
    std::string token = to_lower(s.substr(start, i - start));
    if (std::find(kStopwords.begin(), kStopwords.end(), token) == kStopwords.end()) {
      out.push_back(std::move(token));
    }
  }
  return out;
}

std::size_t token_count(std::string_view s) {
  std::size_t count = 0;
  bool in_token = false;
  for (const char c : s) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string with_thousands(std::int64_t value) {
  const bool negative = value < 0;
  std::string digits = std::to_string(negative ? -value : value);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i % 3) == lead % 3 && !(lead == 0 && i == 0)) out.push_back(',');
    out.push_back(digits[i]);
  }
  return negative ? "-" + out : out;
}

std::string percent(double ratio, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f%%", decimals, ratio * 100.0);
  return buffer;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace dataloop::text
