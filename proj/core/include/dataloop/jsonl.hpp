#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dataloop {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// see either the old or the new contents and never a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// One JSON value per non-blank line. Throws SchemaInvalid naming the line on
/// malformed input.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Serialises each record compactly, one per line, with a trailing newline.
std::string to_jsonl(const std::vector<ordered_json>& records);

void write_jsonl(const std::filesystem::path& path, const std::vector<ordered_json>& records);

void write_json(const std::filesystem::path& path, const ordered_json& value);

// Typed field access for hand-written record decoders. All of these throw
// SchemaInvalid with the field name on a missing or mistyped field.
std::string require_string(const json& obj, const char* key);
std::string optional_string(const json& obj, const char* key, std::string fallback = {});
std::vector<std::string> string_list(const json& obj, const char* key, bool required);

}  // namespace dataloop
