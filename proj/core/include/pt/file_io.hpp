#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace pt {

/// Throws Error(ConfigError) when the file cannot be read.
std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
/// Throws Error(Internal) on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pt
