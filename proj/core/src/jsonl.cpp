#include "dataloop/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "dataloop/error.hpp"

namespace dataloop {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void atomic_write(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw SchemaInvalid(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<ordered_json>& records) {
  std::string out;
  for (const auto& record : records) {
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<ordered_json>& records) {
  atomic_write(path, to_jsonl(records));
}

void write_json(const fs::path& path, const ordered_json& value) {
  atomic_write(path, value.dump(2) + "\n");
}

std::string require_string(const json& obj, const char* key) {
  if (!obj.is_object()) throw SchemaInvalid(std::string("expected an object holding '") + key + "'");
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw SchemaInvalid(std::string("missing or non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& obj, const char* key, std::string fallback) {
  if (!obj.is_object()) return fallback;
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw SchemaInvalid(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& obj, const char* key, bool required) {
  const auto it = obj.is_object() ? obj.find(key) : obj.end();
  if (!obj.is_object() || it == obj.end() || it->is_null()) {
    if (required) throw SchemaInvalid(std::string("missing list field '") + key + "'");
    return {};
  }
  if (!it->is_array()) throw SchemaInvalid(std::string("field '") + key + "' must be a list");
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) throw SchemaInvalid(std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace dataloop
