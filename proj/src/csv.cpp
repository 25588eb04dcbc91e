#include "fhvs/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fhvs::csv {

int Table::column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) return static_cast<int>(j);
    return -1;
}

int Table::require(const std::string& name) const {
    const int j = column(name);
    if (j < 0) throw std::runtime_error("csv: missing required column '" + name + "'");
    return j;
}

Table parse(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        for (;;) {
            const auto comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size())
                throw std::runtime_error("csv: row " + std::to_string(lineno) +
                                         " has wrong field count");
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw std::runtime_error("csv: empty input, no header row");
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void write_file(const std::string& path, const Table& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    for (std::size_t j = 0; j < t.header.size(); ++j)
        out << (j ? "," : "") << t.header[j];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path);
}

std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw std::runtime_error("csv: row " + std::to_string(row) + ", column '" + col +
                                 "': not a number: '" + s + "'");
    if (!std::isfinite(v))
        throw std::runtime_error("csv: row " + std::to_string(row) + ", column '" + col +
                                 "': non-finite value");
    return v;
}

long parse_long(const std::string& s, std::size_t row, const std::string& col) {
    long v = 0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw std::runtime_error("csv: row " + std::to_string(row) + ", column '" + col +
                                 "': not an integer: '" + s + "'");
    return v;
}

}  // namespace fhvs::csv
