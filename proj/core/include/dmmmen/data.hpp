#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmmmen/errors.hpp"

namespace dmmmen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Design matrix plus the regression target for one class.
///
/// `y` holds the logit-transformed probability the target model assigns to
/// `class_tag` (or a raw regression response for synthetic fixtures).
/// Immutable after construction; safe to share across threads.
struct DatasetMatrix {
  Matrix X;
  Vector y;
  std::string class_tag;
  std::optional<std::vector<std::string>> feature_names;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Validates the DatasetMatrix invariants (finite entries, matching sizes).
DatasetMatrix make_dataset(Matrix X, Vector y, std::string class_tag,
                           std::optional<std::vector<std::string>> feature_names = {});

/// A subset draw of row indices (without replacement).
struct BootstrapSample {
  std::vector<Eigen::Index> indices;  // distinct, ascending
  double fraction = 0.0;
};

enum class MatrixFormat { csv, raw_f64 };

MatrixFormat matrix_format_from_string(const std::string& s);

/// Reads a matrix from disk.
///
/// CSV: comma-separated decimal reals, no header unless `skip_header`.
/// raw-f64: two little-endian u64 dims followed by row-major little-endian
/// IEEE doubles. Non-finite entries are rejected in both formats.
Matrix load_matrix(const std::string& path, MatrixFormat format,
                   bool skip_header = false);

/// Writes a matrix in the same formats (used for fixtures and round-trips).
void save_matrix(const Matrix& X, const std::string& path, MatrixFormat format);

/// Elementwise ln(v/(1-v)) with v clamped to [eps, 1-eps].
Vector logit_targets(const Vector& probs, double eps = 1e-6);

/// One DatasetMatrix per class column, pairing X with the logit of that
/// column. For C >= 2 each row of class_probs must sum to 1 within 1e-6;
/// a single column is treated as a standalone binary probability.
std::vector<DatasetMatrix> per_class_split(const Matrix& X, const Matrix& class_probs,
                                           double eps = 1e-6);

/// Draws ceil(fraction*n) distinct row indices, deterministic in `seed`.
BootstrapSample bootstrap(const DatasetMatrix& data, double fraction,
                          std::uint64_t seed);
BootstrapSample bootstrap_rows(Eigen::Index n, double fraction, std::uint64_t seed);

/// Optional per-column min-max scaling to [0,1]; constant columns map to 0.
Matrix minmax_scale(const Matrix& X);

}  // namespace dmmmen
