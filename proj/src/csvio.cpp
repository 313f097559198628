#include "mwion/csvio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mwion/errors.hpp"

namespace mwion {

std::string format_double(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void CsvWriter::add_row(const std::vector<double>& row) {
    if (row.size() != header_.size())
        throw std::invalid_argument("CsvWriter: row width does not match header");
    rows_.push_back(row);
}

std::string CsvWriter::to_string() const {
    std::ostringstream out;
    for (size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
    out << "\n";
    for (const auto& row : rows_) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
    return out.str();
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write file: " + path);
    f << to_string();
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != ' ' && ch != '\t' && ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected_header) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open file: " + path);
    CsvTable t;
    std::string line;
    int lineno = 0;
    if (!std::getline(f, line)) throw ParseError("empty file: " + path, 1);
    ++lineno;
    t.header = split_fields(line);
    if (t.header != expected_header) {
        std::string want;
        for (size_t i = 0; i < expected_header.size(); ++i)
            want += (i ? "," : "") + expected_header[i];
        throw ParseError("header mismatch in " + path + " (expected '" + want + "')", 1);
    }
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_fields(line);
        if (fields.size() != expected_header.size())
            throw ParseError("wrong field count in " + path, lineno);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& s : fields) {
            try {
                size_t pos = 0;
                row.push_back(std::stod(s, &pos));
                if (pos != s.size()) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw ParseError("malformed number '" + s + "' in " + path, lineno);
            }
        }
        t.rows.push_back(std::move(row));
        t.line_numbers.push_back(lineno);
    }
    return t;
}

} // namespace mwion
