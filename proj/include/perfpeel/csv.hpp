#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "perfpeel/linops.hpp"

namespace perfpeel {

/// Formats a double with 17 significant digits ("inf"/"nan" for non-finite).
std::string format_double(double value);

/// One point per line as "x,y,z". Blank lines are skipped.
PointCloud read_points_csv(std::istream& in);
PointCloud read_points_csv(const std::string& path);

/// Comma-separated rows of decimal numbers.
Eigen::MatrixXd read_matrix_csv(std::istream& in);
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M);

}  // namespace perfpeel
