#pragma once

#include <string>
#include <string_view>

namespace wsd {

// Whole-file read; a missing or unreadable file raises ParseError.
std::string read_file(const std::string& path);

// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace wsd
