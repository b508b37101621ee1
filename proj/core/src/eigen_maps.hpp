#pragma once

// Row-major Eigen views over Grid3 storage. Internal to the core library.

#include <Eigen/Core>
#include <cstddef>

namespace phyulstm::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

inline MatrixMap matrix(double* p, std::size_t rows, std::size_t cols) {
  return MatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatrixMap matrix(const double* p, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

/// Rows separated by `stride` doubles, e.g. one time step across a batch.
inline StridedMap strided(double* p, std::size_t rows, std::size_t cols, std::size_t stride) {
  return StridedMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                    Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}
inline ConstStridedMap strided(const double* p, std::size_t rows, std::size_t cols,
                               std::size_t stride) {
  return ConstStridedMap(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}

inline Eigen::Map<RowVector> row_vector(double* p, std::size_t n) {
  return Eigen::Map<RowVector>(p, static_cast<Eigen::Index>(n));
}
inline Eigen::Map<const RowVector> row_vector(const double* p, std::size_t n) {
  return Eigen::Map<const RowVector>(p, static_cast<Eigen::Index>(n));
}

}  // namespace phyulstm::detail
