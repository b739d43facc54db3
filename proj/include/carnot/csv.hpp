#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace carnot {

/// Shortest decimal form that round-trips; identical inputs give identical text.
std::string fmt(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);

private:
    std::ofstream out_;
    std::size_t width_;
};

/// Reads a CSV with a header line; every other line must have the same number of numeric cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

}  // namespace carnot
