#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "phyulstm/autodiff.hpp"

namespace phyulstm {

/// Second-order finite-difference first-derivative operator on a uniform
/// grid: one-sided three-point stencils at both ends, central differences
/// inside. Stored as three nonzeros per row; apply() is O(n).
class FdMatrix {
 public:
  struct Row {
    std::array<std::size_t, 3> cols;
    std::array<double, 3> weights;
  };

  FdMatrix(std::size_t n, double dt);

  std::size_t n() const { return n_; }
  double dt() const { return dt_; }
  Row row(std::size_t i) const;

  /// out = D * in for a series with the given element stride.
  void apply(const double* in, double* out, std::size_t stride = 1) const;
  /// out += D^T * in.
  void apply_transpose_add(const double* in, double* out, std::size_t stride = 1) const;

  std::vector<double> apply(std::span<const double> u) const;

  /// Row-major n x n dense form (tests and inspection only).
  std::vector<double> dense() const;

 private:
  std::size_t n_;
  double dt_;
};

/// Derivative along the time axis of every (entry, channel) series.
/// The gradient is D^T applied to the upstream gradient.
Var differentiate(Var u, const FdMatrix& fd);

/// differentiate(differentiate(u)).
Var second_derivative(Var u, const FdMatrix& fd);

}  // namespace phyulstm
