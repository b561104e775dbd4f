#include "csv.hpp"

#include "flexcap/common.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace flexcap::csv {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int Table::require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw ParseError(path, 1, "missing column '" + name + "'");
    return c;
}

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open file");
    Table t;
    t.path = path;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(s);
            continue;
        }
        Row r{lineno, split(s)};
        if (r.cells.size() != t.header.size()) {
            throw ParseError(path, lineno,
                             "expected " + std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(r.cells.size()));
        }
        t.rows.push_back(std::move(r));
    }
    if (t.header.empty()) throw ParseError(path, "missing header row");
    return t;
}

double to_double(const Table& t, const Row& r, int col) {
    const std::string& s = r.cells.at(col);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        if (s == "inf" || s == "+inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        throw ParseError(t.path, r.line, "not a number in column '" + t.header[col] + "': '" + s + "'");
    }
    return v;
}

}  // namespace flexcap::csv
