#pragma once

// Small text and file helpers shared by the on-disk formats.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace abench::text {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Splits on `sep`; empty fields are kept.
std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on runs of spaces/tabs; empty fields are dropped.
std::vector<std::string_view> split_ws(std::string_view s);

std::string_view trim(std::string_view s);

/// Whole-file read. Throws std::runtime_error if the file can't be opened.
std::string read_file(const std::filesystem::path& p);
std::vector<std::string> read_lines(const std::filesystem::path& p);

/// Writes to "<p>.tmp" then renames over `p`.
void write_file_atomic(const std::filesystem::path& p, std::string_view data);

}  // namespace abench::text
