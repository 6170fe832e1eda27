#include "dataloop/json_payload.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dataloop {
namespace {

enum class Scan { Balanced, Mismatched, Unterminated };

// Finds the end of the container opening at `start`, honouring JSON string
// literals. On success `end` is one past the closing bracket.
Scan scan_container(std::string_view s, std::size_t start, std::size_t& end) {
  std::vector<char> expected;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[': expected.push_back(']'); break;
      case '{': expected.push_back('}'); break;
      case ']':
      case '}':
        if (expected.empty() || expected.back() != c) return Scan::Mismatched;
        expected.pop_back();
        if (expected.empty()) {
          end = i + 1;
          return Scan::Balanced;
        }
        break;
      default: break;
    }
  }
  return Scan::Unterminated;
}

// Drops commas that are followed (after whitespace) by a closing bracket.
std::string strip_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out += c;
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\n' || s[j] == '\r')) ++j;
      if (j < s.size() && (s[j] == ']' || s[j] == '}')) continue;
    }
    out += c;
  }
  return out;
}

std::optional<nlohmann::json> try_parse(std::string_view candidate) {
  auto value = nlohmann::json::parse(candidate, nullptr, false);
  if (!value.is_discarded()) return value;
  value = nlohmann::json::parse(strip_trailing_commas(candidate), nullptr, false);
  if (!value.is_discarded()) return value;
  return std::nullopt;
}

}  // namespace

nlohmann::json extract_json_payload(std::string_view raw) {
  bool saw_unterminated = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '[' && raw[i] != '{') continue;
    std::size_t end = 0;
    switch (scan_container(raw, i, end)) {
      case Scan::Balanced:
        if (auto value = try_parse(raw.substr(i, end - i))) return *value;
        break;
      case Scan::Unterminated:
        saw_unterminated = true;
        break;
      case Scan::Mismatched:
        break;
    }
  }
  if (saw_unterminated) throw UnbalancedPayload("model output opens a JSON container that never closes");
  throw NoPayloadFound("model output contains no JSON array or object");
}

}  // namespace dataloop
