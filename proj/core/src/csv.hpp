#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rpcomb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a header row plus data rows. Fields are split on commas; surrounding
/// whitespace and optional double quotes are stripped. Every data row must have
/// as many fields as the header.
Table read(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);

/// Strict full-string parse; nullopt if any trailing garbage remains.
std::optional<double> parse_double(std::string_view text);

/// Shortest text guaranteed to round-trip a double (17 significant digits).
std::string format_double(double value);

/// Hex-float text ("%a"); exact and parseable by parse_double.
std::string format_hex(double value);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rpcomb::csv
