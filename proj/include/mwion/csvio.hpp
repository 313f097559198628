#pragma once

#include <string>
#include <vector>

namespace mwion {

// Plot-ready CSV with a fixed numeric format so identical data always
// produces byte-identical files.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(const std::vector<double>& row);
    void write(const std::string& path) const;
    std::string to_string() const;

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> line_numbers;  // source line of each row, for diagnostics
};

// Strict reader: header must match `expected_header` exactly, every cell must
// parse as a number; failures name the offending line.
CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected_header);

std::string format_double(double v);

} // namespace mwion
