#include "dlev/table.hpp"

#include "dlev/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dlev {

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw ValidationError("table row width does not match the header");
    rows.push_back(std::move(row));
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ValidationError("table has no column '" + std::string(name) + "'");
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_number(long long v) { return std::to_string(v); }

double parse_number(std::string_view cell, std::string_view where) {
    if (cell == "nan") return std::nan("");
    double v = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ValidationError(std::string(where) + ": '" + std::string(cell) + "' is not a number");
    }
    return v;
}

namespace {

void write_cell(std::ostream& out, const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) {
        out << cell;
        return;
    }
    out << '"';
    for (char c : cell) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

} // namespace

void write_csv(std::ostream& out, const Table& t) {
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            write_cell(out, cells[i]);
        }
        out << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
}

void write_csv(const std::filesystem::path& path, const Table& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    write_csv(out, t);
}

Table parse_csv(std::istream& in, std::string_view source_name) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool quoted = false;
    bool any = false;
    char c = 0;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    cell += '"';
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            record.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n') {
            record.push_back(std::move(cell));
            cell.clear();
            records.push_back(std::move(record));
            record.clear();
            any = false;
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (quoted) throw ValidationError(std::string(source_name) + ": unterminated quoted field");
    if (any) {
        record.push_back(std::move(cell));
        records.push_back(std::move(record));
    }
    if (records.empty()) throw ValidationError(std::string(source_name) + ": empty CSV file");

    Table t;
    t.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != t.header.size()) {
            throw ValidationError(std::string(source_name) + ":" + std::to_string(i + 1) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, got " +
                                  std::to_string(records[i].size()));
        }
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    return parse_csv(in, path.string());
}

} // namespace dlev
