#include "nsde/text_io.hpp"

#include <charconv>
#include <cmath>

#include "nsde/error.hpp"

namespace nsde {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

double parse_double(std::string_view field, std::size_t line) {
    field = trim(field);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw FormatError("malformed number '" + std::string(field) + "'", line);
    }
    if (!std::isfinite(v)) throw FormatError("non-finite value '" + std::string(field) + "'", line);
    return v;
}

std::int64_t parse_int(std::string_view field, std::size_t line) {
    field = trim(field);
    std::int64_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw FormatError("malformed integer '" + std::string(field) + "'", line);
    }
    return v;
}

void write_comment_lines(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& lines) {
    for (const auto& [k, v] : lines) os << "# " << k << ": " << v << '\n';
}

}  // namespace nsde
