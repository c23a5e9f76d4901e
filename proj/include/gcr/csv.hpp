#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gcr/linalg.hpp"

namespace gcr {

// Locale-independent decimal formatting with full double round-trip.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw InvalidSpec("csv: cannot parse number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

// Matrix CSV with a header row of column names.
inline void write_matrix_csv(const std::string& path, const Matrix& m,
                             const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw Error("csv: cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << format_double(m(i, j));
    out << "\n";
  }
  if (!out) throw Error("csv: write failed: " + path);
}

// Reads a matrix CSV, skipping the header row.
inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("csv: cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidSpec("csv: empty file: " + path);
  std::vector<std::vector<double>> rows;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw InvalidSpec("csv: ragged row in " + path);
    std::vector<double> row;
    for (const std::string& f : fields) row.push_back(parse_double(f));
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

inline void write_labels_csv(const std::string& path,
                             const Eigen::VectorXi& labels) {
  std::ofstream out(path);
  if (!out) throw Error("csv: cannot open for writing: " + path);
  out << "label\n";
  for (Eigen::Index i = 0; i < labels.size(); ++i) out << labels(i) << "\n";
  if (!out) throw Error("csv: write failed: " + path);
}

inline Eigen::VectorXi read_labels_csv(const std::string& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.cols() != 1) throw InvalidSpec("csv: labels must have one column");
  Eigen::VectorXi labels(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, 0);
    if (v != std::floor(v)) throw InvalidSpec("csv: non-integer label");
    labels(i) = int(v);
  }
  return labels;
}

}  // namespace gcr
