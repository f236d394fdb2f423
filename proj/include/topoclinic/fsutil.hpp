#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace topoclinic {

/// Whole-file read; throws kIo.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);

}  // namespace topoclinic
