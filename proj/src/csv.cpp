#include "autows/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autows/error.hpp"

namespace autows::csv {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string at(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

template <typename Scalar, typename Parse>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> read_matrix(
    const std::filesystem::path& path, Parse parse) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(path.string() + ": missing \"rows,cols\" header");
  const auto header = split(lines[0], ',');
  if (header.size() != 2) throw Error(at(path, 1) + ": header must be \"rows,cols\"");
  const long long rows = parse_int(header[0], at(path, 1));
  const long long cols = parse_int(header[1], at(path, 1));
  if (rows < 0 || cols < 0) throw Error(at(path, 1) + ": negative shape");

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
  for (long long r = 0; r < rows; ++r) {
    const std::size_t ln = static_cast<std::size_t>(r) + 1;
    if (ln >= lines.size()) {
      throw Error(path.string() + ": expected " + std::to_string(rows) + " rows, found " +
                  std::to_string(r));
    }
    const auto fields = split(lines[ln], ',');
    if (static_cast<long long>(fields.size()) != cols) {
      throw Error(at(path, ln + 1) + ": shape mismatch, expected " + std::to_string(cols) +
                  " columns, found " + std::to_string(fields.size()));
    }
    for (long long c = 0; c < cols; ++c) m(r, c) = parse(fields[c], at(path, ln + 1));
  }
  for (std::size_t ln = static_cast<std::size_t>(rows) + 1; ln < lines.size(); ++ln) {
    if (!lines[ln].empty()) throw Error(at(path, ln + 1) + ": trailing garbage after last row");
  }
  return m;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw Error(where + ": invalid number '" + std::string(token) + "'");
  }
  if (!std::isfinite(v)) throw Error(where + ": non-finite value '" + std::string(token) + "'");
  return v;
}

long long parse_int(std::string_view token, const std::string& where) {
  long long v = 0;
  const char* first = token.data();
  const char* last = first + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw Error(where + ": invalid integer '" + std::string(token) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Eigen::MatrixXd read_real_matrix(const std::filesystem::path& path) {
  return read_matrix<double>(path, parse_double);
}

Eigen::MatrixXi read_int_matrix(const std::filesystem::path& path) {
  return read_matrix<int>(path, [](std::string_view t, const std::string& w) {
    const long long v = parse_int(t, w);
    if (v < INT32_MIN || v > INT32_MAX) throw Error(w + ": integer out of range");
    return static_cast<int>(v);
  });
}

void write_real_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_int_matrix(const std::filesystem::path& path, const Eigen::MatrixXi& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

std::vector<int> read_int_lines(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  std::size_t count = lines.size();
  while (count > 0 && lines[count - 1].empty()) --count;
  std::vector<int> values;
  values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const long long v = parse_int(lines[i], at(path, i + 1));
    if (v < INT32_MIN || v > INT32_MAX) throw Error(at(path, i + 1) + ": integer out of range");
    values.push_back(static_cast<int>(v));
  }
  return values;
}

void write_int_lines(const std::filesystem::path& path, const std::vector<int>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (int v : values) out << v << '\n';
}

}  // namespace autows::csv
