#include "phyulstm/differentiator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace phyulstm {

FdMatrix::FdMatrix(std::size_t n, double dt) : n_(n), dt_(dt) {
  if (n < 3) throw std::invalid_argument("FdMatrix: n must be >= 3, got " + std::to_string(n));
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("FdMatrix: dt must be positive and finite");
}

FdMatrix::Row FdMatrix::row(std::size_t i) const {
  const double s = 1.0 / dt_;
  if (i == 0) return {{0, 1, 2}, {-1.5 * s, 2.0 * s, -0.5 * s}};
  if (i == n_ - 1) return {{n_ - 3, n_ - 2, n_ - 1}, {0.5 * s, -2.0 * s, 1.5 * s}};
  return {{i - 1, i, i + 1}, {-0.5 * s, 0.0, 0.5 * s}};
}

void FdMatrix::apply(const double* in, double* out, std::size_t stride) const {
  const double s = 1.0 / dt_;
  const std::size_t last = n_ - 1;
  out[0] = s * (-1.5 * in[0] + 2.0 * in[stride] - 0.5 * in[2 * stride]);
  for (std::size_t i = 1; i < last; ++i)
    out[i * stride] = 0.5 * s * (in[(i + 1) * stride] - in[(i - 1) * stride]);
  out[last * stride] =
      s * (0.5 * in[(last - 2) * stride] - 2.0 * in[(last - 1) * stride] + 1.5 * in[last * stride]);
}

void FdMatrix::apply_transpose_add(const double* in, double* out, std::size_t stride) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const Row r = row(i);
    const double g = in[i * stride];
    for (std::size_t k = 0; k < 3; ++k) out[r.cols[k] * stride] += r.weights[k] * g;
  }
}

std::vector<double> FdMatrix::apply(std::span<const double> u) const {
  if (u.size() != n_) {
    throw std::invalid_argument("FdMatrix::apply: series length " + std::to_string(u.size()) +
                                " does not match n = " + std::to_string(n_));
  }
  std::vector<double> out(n_);
  apply(u.data(), out.data());
  return out;
}

std::vector<double> FdMatrix::dense() const {
  std::vector<double> m(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const Row r = row(i);
    for (std::size_t k = 0; k < 3; ++k) m[i * n_ + r.cols[k]] += r.weights[k];
  }
  return m;
}

Var differentiate(Var u, const FdMatrix& fd) {
  const Shape s = u.shape();
  if (s.time != fd.n()) {
    throw std::invalid_argument("differentiate: sequence length " + std::to_string(s.time) +
                                " does not match differentiator size " + std::to_string(fd.n()));
  }
  const std::size_t B = s.batch, T = s.time, C = s.channels;
  Grid3 out(s);
  const Grid3& x = u.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) fd.apply(x.ptr() + b * T * C + c, out.ptr() + b * T * C + c, C);
  return u.tape().record(std::move(out), {u}, [u, fd, B, T, C](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    Grid3& gx = tape.grad_of(u.id());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        fd.apply_transpose_add(gy.ptr() + b * T * C + c, gx.ptr() + b * T * C + c, C);
  });
}

Var second_derivative(Var u, const FdMatrix& fd) { return differentiate(differentiate(u, fd), fd); }

}  // namespace phyulstm
