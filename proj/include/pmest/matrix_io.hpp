#pragma once

// Matrix files. CSV holds one sample per row (optionally under one header
// row); the binary format is
//   "PMX1" | u32 LE d | u32 LE n | d*n f64 LE, column-major (sample-major).

#include <iosfwd>
#include <optional>
#include <string>

#include "pmest/linalg.hpp"

namespace pmest {

enum class MatrixFormat { csv, bin };

/// ".bin" selects the binary format, anything else CSV.
MatrixFormat format_for_path(const std::string& path);

/// Samples become columns: a CSV with n rows of d fields gives d x n.
SampleMatrix read_csv(std::istream& in);
SampleMatrix read_bin(std::istream& in);
SampleMatrix load_matrix(const std::string& path, std::optional<MatrixFormat> format = std::nullopt);

/// Writes column j of `m` as row j, 17 significant digits.
void write_csv(std::ostream& out, const Eigen::MatrixXd& m);
void write_bin(std::ostream& out, const Eigen::MatrixXd& m);
void save_matrix(const std::string& path, const Eigen::MatrixXd& m, std::optional<MatrixFormat> format = std::nullopt);

/// %.17g
std::string format_double(double v);

}  // namespace pmest
