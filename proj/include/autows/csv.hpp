#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autows::csv {

// Headered matrix CSV: the first line is "rows,cols", followed by exactly
// `rows` lines of `cols` comma-separated values. Numbers use '.' as the
// decimal point regardless of locale. Anything after the last row other
// than blank lines is rejected.
Eigen::MatrixXd read_real_matrix(const std::filesystem::path& path);
Eigen::MatrixXi read_int_matrix(const std::filesystem::path& path);

void write_real_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
void write_int_matrix(const std::filesystem::path& path, const Eigen::MatrixXi& m);

// One integer per line.
std::vector<int> read_int_lines(const std::filesystem::path& path);
void write_int_lines(const std::filesystem::path& path, const std::vector<int>& values);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

// Parsers for single tokens; throw autows::Error naming `where` on failure.
double parse_double(std::string_view token, const std::string& where);
long long parse_int(std::string_view token, const std::string& where);

std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace autows::csv
