#pragma once

#include <string>
#include <string_view>

namespace dataloop {

/// Lower-case hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes. Throws IoError when the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace dataloop
