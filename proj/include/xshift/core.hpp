#ifndef XSHIFT_CORE_HPP_
#define XSHIFT_CORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xshift {

inline constexpr const char* kVersion = "1.0.0";

/// Row-major table of real-valued features; one sample per row.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, shapes or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not complete (singular system, failed factorization).
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline std::span<const double> row_span(const DataMatrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::vector<double> column(const DataMatrix& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vector column_means(const DataMatrix& m) {
  if (m.rows() == 0) throw ConfigError("column_means: empty matrix");
  return m.colwise().mean().transpose();
}

/// Rows of `m` at the given indices, in order.
inline DataMatrix take_rows(const DataMatrix& m, std::span<const std::size_t> idx) {
  DataMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline double mean_squared_error(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ConfigError("mean_squared_error: length mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

}  // namespace xshift

#endif  // XSHIFT_CORE_HPP_
