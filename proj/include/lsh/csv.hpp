#pragma once

#include <string>
#include <vector>

namespace lsh {

// Plain CSV, no quoting: field values in this project never contain commas.
// The strict reader enforces a header and a fixed column count per row so
// every emitted file round-trips through it (tested).

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> row);
    void add_row_values(const std::vector<double>& values);

    // atomic-ish: writes a temp file then renames
    void save(const std::string& path) const;

    const CsvTable& table() const { return table_; }

private:
    CsvTable table_;
};

CsvTable read_csv_strict(const std::string& path);

// shortest round-trip double formatting, also used by the JSON artifacts
std::string format_double(double v);

}  // namespace lsh
