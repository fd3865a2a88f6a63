#include "perfpeel/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "perfpeel/errors.hpp"

namespace perfpeel {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    if (first == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": empty field");
    }
    const std::string token = cell.substr(first, last - first + 1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": cannot parse '" + token + "'");
    }
    row.push_back(value);
  }
  return row;
}

template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(parse_row(line, line_no), line_no);
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return in;
}

}  // namespace

PointCloud read_points_csv(std::istream& in) {
  PointCloud cloud;
  for_each_row(in, [&](const std::vector<double>& row, std::size_t line_no) {
    if (row.size() != 3) {
      throw FormatError("line " + std::to_string(line_no) + ": expected x,y,z");
    }
    cloud.points.push_back({row[0], row[1], row[2]});
  });
  return cloud;
}

PointCloud read_points_csv(const std::string& path) {
  auto in = open_input(path);
  return read_points_csv(in);
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  for_each_row(in, [&](std::vector<double> row, std::size_t line_no) {
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("line " + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  });
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
  return M;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto in = open_input(path);
  return read_matrix_csv(in);
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write_matrix_csv(out, M);
}

}  // namespace perfpeel
