#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "caf/errors.hpp"
#include "caf/matrix.hpp"

namespace caf::csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// Shortest representation that round-trips the exact double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char trial[32];
      std::snprintf(trial, sizeof(trial), "%.*g", prec, v);
      std::sscanf(trial, "%lf", &back);
      if (back == v) return trial;
    }
  }
  return buf;
}

inline double parse_double(const std::string& s, int line_no, const std::string& file) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(file + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

inline long parse_int(const std::string& s, int line_no, const std::string& file) {
  long v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError(file + ":" + std::to_string(line_no) + ": bad integer '" + s + "'");
  return v;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) return {};
  const int cols = static_cast<int>(split_line(lines[0]).size());
  Matrix m(static_cast<int>(lines.size()), cols);
  for (int i = 0; i < m.rows(); ++i) {
    const auto cells = split_line(lines[i]);
    if (static_cast<int>(cells.size()) != cols)
      throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": expected " +
                       std::to_string(cols) + " columns, got " + std::to_string(cells.size()));
    for (int j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j], i + 1, path.string());
  }
  return m;
}

}  // namespace caf::csv
