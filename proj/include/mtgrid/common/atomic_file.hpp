#pragma once

#include <filesystem>
#include <string_view>

namespace mtgrid {

// Writes `contents` to a sibling temporary file and renames it over `path`.
// Creates missing parent directories. Throws IoError with the path.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace mtgrid
