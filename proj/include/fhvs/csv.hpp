#pragma once

#include <string>
#include <vector>

namespace fhvs::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
    int require(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text);

void write_file(const std::string& path, const Table& t);

// round-trip-exact formatting for doubles
std::string format(double v);
double parse_double(const std::string& s, std::size_t row, const std::string& col);
long parse_long(const std::string& s, std::size_t row, const std::string& col);

}  // namespace fhvs::csv
