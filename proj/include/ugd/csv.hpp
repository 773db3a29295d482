// Minimal numeric CSV reading/writing used by the feature and statistics
// containers. Values are written with 17 significant digits so that a
// write/read cycle reproduces every double exactly.
#pragma once

#include "ugd/core.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ugd::csv {

using table = std::vector<std::vector<double>>;

inline std::string format_double(double value)
{
    char buffer[64];
    const int n = std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return std::string(buffer, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view text, const std::filesystem::path& origin, std::size_t row)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw schema_mismatch(origin.string() + ": row " + std::to_string(row + 1) +
                              ": cannot parse '" + std::string(text) + "' as a number");
    return value;
}

/// Reads a header-less numeric CSV. Blank lines are skipped.
inline table read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw schema_mismatch("cannot open " + path.string());
    table rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        std::vector<double> row;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            row.push_back(parse_double(rest.substr(0, comma), path, rows.size()));
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Reads a CSV and checks that every row has exactly `columns` entries.
inline table read(const std::filesystem::path& path, std::size_t columns)
{
    auto rows = read(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != columns)
            throw schema_mismatch(path.string() + ": row " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows[i].size()) + " columns, expected " +
                                  std::to_string(columns));
    }
    return rows;
}

inline void write_row(std::ostream& out, const double* data, Index n, Index stride = 1)
{
    for (Index j = 0; j < n; ++j) {
        if (j)
            out << ',';
        out << format_double(data[j * stride]);
    }
    out << '\n';
}

/// Writes a matrix row by row.
inline void write_matrix(const std::filesystem::path& path, const Matrix& m)
{
    std::ofstream out(path);
    if (!out)
        throw error("cannot write " + path.string());
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j)
                out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

inline Matrix read_matrix(const std::filesystem::path& path, Index rows, Index cols)
{
    const auto table = read(path, static_cast<std::size_t>(cols));
    if (static_cast<Index>(table.size()) != rows)
        throw schema_mismatch(path.string() + ": has " + std::to_string(table.size()) +
                              " rows, expected " + std::to_string(rows));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

} // namespace ugd::csv
