#include "lsh/csv.hpp"

#include "lsh/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lsh {

CsvWriter::CsvWriter(std::vector<std::string> header) {
    table_.header = std::move(header);
}

void CsvWriter::add_row(std::vector<std::string> row) {
    if (row.size() != table_.header.size()) {
        throw InvalidArgumentError("csv row width " + std::to_string(row.size()) +
                                   " does not match header width " +
                                   std::to_string(table_.header.size()));
    }
    table_.rows.push_back(std::move(row));
}

void CsvWriter::add_row_values(const std::vector<double>& values) {
    std::vector<std::string> row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_double(v));
    add_row(std::move(row));
}

static void write_line(std::ofstream& out, const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << fields[i];
    }
    out << '\n';
}

void CsvWriter::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        write_line(out, table_.header);
        for (const auto& row : table_.rows) write_line(out, row);
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

CsvTable read_csv_strict(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    CsvTable table;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(cur);
        return fields;
    };
    if (!std::getline(in, line)) throw InvalidDataError("empty csv: " + path);
    table.header = split(line);
    size_t width = table.header.size();
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.eof()) break;
        auto fields = split(line);
        if (fields.size() != width) {
            throw InvalidDataError(path + ":" + std::to_string(lineno) +
                                   ": expected " + std::to_string(width) +
                                   " columns, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace lsh
