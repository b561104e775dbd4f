#pragma once

// Minimal comma-separated reader: header row, no quoting, '#' comments.

#include <string>
#include <vector>

namespace flexcap::csv {

struct Row {
    std::size_t line = 0;
    std::vector<std::string> cells;
};

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    int column(const std::string& name) const;  // -1 if absent
    int require_column(const std::string& name) const;
};

Table read(const std::string& path);
double to_double(const Table& t, const Row& r, int col);
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& line, char sep = ',');

}  // namespace flexcap::csv
