#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tape {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`, so readers never
// observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::string> split_lines(std::string_view text);
std::string_view trim(std::string_view s) noexcept;
std::string to_lower_ascii(std::string_view s);

}  // namespace tape
