#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace mkme {

/// n x d table of examples, one example per row. Row-major so that each
/// example is contiguous and can be viewed as a span.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Read-only view of a single d-dimensional point.
using PointView = std::span<const double>;

inline PointView row(const DataMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline PointView as_point(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Copies the listed rows of `m` into a new matrix, in order.
template <typename IndexRange>
DataMatrix select_rows(const DataMatrix& m, const IndexRange& idx) {
  DataMatrix out(static_cast<Eigen::Index>(std::size(idx)), m.cols());
  Eigen::Index r = 0;
  for (auto i : idx) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace mkme
