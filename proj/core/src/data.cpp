#include "dmmmen/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dmmmen/rng.hpp"

namespace dmmmen {

DatasetMatrix make_dataset(Matrix X, Vector y, std::string class_tag,
                           std::optional<std::vector<std::string>> feature_names) {
  if (X.rows() < 1 || X.cols() < 1)
    throw DimensionError("dataset requires n >= 1 and p >= 1");
  if (y.size() != X.rows())
    throw DimensionError("response length does not match row count");
  if (!X.allFinite() || !y.allFinite())
    throw ValueError("dataset contains non-finite entries");
  if (feature_names && static_cast<Eigen::Index>(feature_names->size()) != X.cols())
    throw DimensionError("feature_names length does not match column count");
  return DatasetMatrix{std::move(X), std::move(y), std::move(class_tag),
                       std::move(feature_names)};
}

MatrixFormat matrix_format_from_string(const std::string& s) {
  if (s == "csv") return MatrixFormat::csv;
  if (s == "raw-f64") return MatrixFormat::raw_f64;
  throw ValueError("unknown matrix format: " + s);
}

namespace {

double parse_cell(const std::string& cell, Eigen::Index row, Eigen::Index col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  // Require the whole trimmed cell to be consumed.
  while (end && *end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
  if (end == begin || (end && *end != '\0')) {
    std::ostringstream msg;
    msg << "malformed numeric cell '" << cell << "' at row " << row << ", column " << col;
    throw ParseError(msg.str());
  }
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite entry at row " << row << ", column " << col;
    throw ValueError(msg.str());
  }
  return v;
}

Matrix load_csv(const std::string& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  Eigen::Index lineno = 0;
  if (skip_header && !std::getline(in, line)) throw ParseError("empty file: " + path);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Skip completely blank trailing lines.
    if (line.find_first_not_of(" \t") == std::string::npos) {
      ++lineno;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index col = 0;
    while (std::getline(ss, cell, ',')) row.push_back(parse_cell(cell, lineno, col++));
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream msg;
      msg << "ragged row " << lineno << ": got " << row.size() << " cells, expected "
          << rows.front().size();
      throw DimensionError(msg.str());
    }
    rows.push_back(std::move(row));
    ++lineno;
  }
  if (rows.empty()) throw ParseError("no data rows in " + path);
  Matrix X(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return X;
}

Matrix load_raw_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::uint64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims)))
    throw ParseError("raw-f64 header truncated: " + path);
  const auto n = static_cast<Eigen::Index>(dims[0]);
  const auto p = static_cast<Eigen::Index>(dims[1]);
  if (n < 1 || p < 1) throw DimensionError("raw-f64 dims must be >= 1");
  Matrix X(n, p);
  std::vector<double> buf(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(sizeof(double) * buf.size())))
      throw ParseError("raw-f64 payload truncated: " + path);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double v = buf[static_cast<std::size_t>(j)];
      if (!std::isfinite(v)) throw ValueError("non-finite entry in raw-f64 file");
      X(i, j) = v;
    }
  }
  char extra;
  if (in.read(&extra, 1)) throw DimensionError("raw-f64 file longer than declared dims");
  return X;
}

}  // namespace

Matrix load_matrix(const std::string& path, MatrixFormat format, bool skip_header) {
  return format == MatrixFormat::csv ? load_csv(path, skip_header) : load_raw_f64(path);
}

void save_matrix(const Matrix& X, const std::string& path, MatrixFormat format) {
  std::ofstream out(path, format == MatrixFormat::raw_f64
                              ? std::ios::binary | std::ios::trunc
                              : std::ios::trunc);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  if (format == MatrixFormat::csv) {
    out.precision(17);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (j) out << ',';
        out << X(i, j);
      }
      out << '\n';
    }
  } else {
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(X.rows()),
                                   static_cast<std::uint64_t>(X.cols())};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double v = X(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  if (!out) throw ParseError("short write: " + path);
}

Vector logit_targets(const Vector& probs, double eps) {
  if (!(eps > 0.0) || !(eps < 0.5)) throw ValueError("eps must lie in (0, 0.5)");
  Vector out(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double v = probs[i];
    if (!(v >= 0.0) || !(v <= 1.0))
      throw ValueError("probability outside [0,1] at index " + std::to_string(i));
    const double c = std::min(std::max(v, eps), 1.0 - eps);
    out[i] = std::log(c / (1.0 - c));
  }
  return out;
}

std::vector<DatasetMatrix> per_class_split(const Matrix& X, const Matrix& class_probs,
                                           double eps) {
  if (X.rows() != class_probs.rows())
    throw DimensionError("class_probs row count does not match X");
  const Eigen::Index C = class_probs.cols();
  if (C >= 2) {
    for (Eigen::Index i = 0; i < class_probs.rows(); ++i) {
      const double s = class_probs.row(i).sum();
      if (std::abs(s - 1.0) > 1e-6)
        throw ValueError("class probability row " + std::to_string(i) +
                         " sums to " + std::to_string(s));
    }
  }
  std::vector<DatasetMatrix> out;
  out.reserve(static_cast<std::size_t>(C));
  for (Eigen::Index c = 0; c < C; ++c)
    out.push_back(make_dataset(X, logit_targets(class_probs.col(c), eps),
                               "class_" + std::to_string(c)));
  return out;
}

BootstrapSample bootstrap_rows(Eigen::Index n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ValueError("bootstrap fraction must lie in (0, 1]");
  const auto m = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(n) - 1e-12));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first m slots are a uniform subset.
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Eigen::Index>(
                           rng.uniform_index(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return BootstrapSample{std::move(idx), fraction};
}

BootstrapSample bootstrap(const DatasetMatrix& data, double fraction,
                          std::uint64_t seed) {
  return bootstrap_rows(data.n(), fraction, seed);
}

Matrix minmax_scale(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double lo = X.col(j).minCoeff();
    const double hi = X.col(j).maxCoeff();
    if (hi > lo)
      out.col(j) = (X.col(j).array() - lo) / (hi - lo);
    else
      out.col(j).setZero();
  }
  return out;
}

}  // namespace dmmmen
