#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace resnet_lab::csv {

/// 17 significant digits; parses back to the identical double.
std::string format_double(double v);

/// Shortest round-trip form, with ".0" appended to integral values.
std::string format_short(double v);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Throws ParseError(row) on anything but a complete finite-or-not number.
double parse_double(std::string_view field, long row);
long parse_long(std::string_view field, long row);

/// Reads all lines, stripping trailing '\r'. Trailing empty lines are dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

}  // namespace resnet_lab::csv
