#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace leakdet::io {

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

// C99 hex-float, exact at full binary precision.
std::string format_hex(double v);
double parse_double(std::string_view s);

// Writes to "<path>.tmp" and renames over the target.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split_fields(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// FNV-1a over the bit patterns of the values.
std::uint64_t fingerprint(std::span<const double> values,
                          std::uint64_t seed = 14695981039346656037ull);

}  // namespace leakdet::io
