#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlev {

// A CSV table of already-formatted cells.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::size_t column(std::string_view name) const; // throws ValidationError if absent
};

// %.17g, so values round-trip exactly; "nan" for NaN.
std::string format_number(double v);
std::string format_number(long long v);
inline std::string format_number(int v) { return format_number(static_cast<long long>(v)); }
inline std::string format_number(std::size_t v) { return format_number(static_cast<long long>(v)); }
double parse_number(std::string_view cell, std::string_view where);

void write_csv(std::ostream& out, const Table& t);
void write_csv(const std::filesystem::path& path, const Table& t);
Table parse_csv(std::istream& in, std::string_view source_name);
Table read_csv(const std::filesystem::path& path);

} // namespace dlev
