#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace contrastive {

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a truncated file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Decimal with 17 significant digits; parses back to the identical double.
std::string format_double(double x);

} // namespace contrastive
