#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dataloop::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Trims and replaces every run of whitespace with a single space.
std::string collapse_whitespace(std::string_view s);

/// Case-fold, trim, collapse internal whitespace and strip leading articles
/// ("the", "a", "an"). Used as the merge key for concept terms.
std::string normalize_term(std::string_view s);

/// `normalize_term` without the case fold: the display form kept on merged
/// concepts.
std::string tidy_term(std::string_view s);

/// Whitespace-separated tokens, case-folded. Punctuation stays attached.
std::vector<std::string> whitespace_tokens(std::string_view s);

/// Lower-cased alphanumeric runs with common English function words removed.
std::vector<std::string> content_tokens(std::string_view s);

/// Number of whitespace-separated tokens.
std::size_t token_count(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// 9268 -> "9,268".
std::string with_thousands(std::int64_t value);

/// ratio 0.658612 with 2 decimals -> "65.86%".
std::string percent(double ratio, int decimals);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace dataloop::text
