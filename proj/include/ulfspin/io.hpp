#pragma once

// Small text-output helpers shared by the CSV and JSON writers.

#include <filesystem>
#include <string>
#include <string_view>

namespace ulfspin {

/// 12 significant digits; -0 is printed as 0.
std::string format_real(double v);

/// Writes the whole file, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ulfspin
