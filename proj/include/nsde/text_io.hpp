#pragma once

// Small helpers for the delimiter-separated text formats.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nsde {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep);

// Strict parsers; throw FormatError carrying `line`.
double parse_double(std::string_view field, std::size_t line);
std::int64_t parse_int(std::string_view field, std::size_t line);

// Writes "# key: value" provenance lines.
void write_comment_lines(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& lines);

}  // namespace nsde
