#include "phyulstm/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "eigen_maps.hpp"

namespace phyulstm {

namespace {

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.to_string() + " vs " +
                                b.to_string());
  }
}

void accumulate(Tape& tape, Var target, const Grid3& delta) {
  if (!target.requires_grad()) return;
  Grid3& g = tape.grad_of(target.id());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Var conv1d_causal(Var input, Var weights, Var bias) {
  const Shape in = input.shape();
  const Shape ws = weights.shape();
  if (ws.batch < 1 || ws.time != in.channels) {
    throw std::invalid_argument("conv1d_causal: input shape " + in.to_string() +
                                " incompatible with weights shape " + ws.to_string() +
                                " (expected weights (K, " + std::to_string(in.channels) +
                                ", Cout))");
  }
  if (bias.shape() != Shape{1, 1, ws.channels}) {
    throw std::invalid_argument("conv1d_causal: bias shape " + bias.shape().to_string() +
                                " does not match weights shape " + ws.to_string());
  }
  const std::size_t B = in.batch, T = in.time, Cin = in.channels, Cout = ws.channels, K = ws.batch;

  Grid3 out({B, T, Cout});
  const Grid3& x = input.value();
  const Grid3& w = weights.value();
  auto bvec = detail::row_vector(bias.value().ptr(), Cout);
  for (std::size_t b = 0; b < B; ++b) {
    auto yb = detail::matrix(out.ptr() + b * T * Cout, T, Cout);
    yb.rowwise() = bvec;
    auto xb = detail::matrix(x.ptr() + b * T * Cin, T, Cin);
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t shift = K - 1 - k;
      if (shift >= T) continue;
      auto wk = detail::matrix(w.ptr() + k * Cin * Cout, Cin, Cout);
      yb.bottomRows(T - shift).noalias() += xb.topRows(T - shift) * wk;
    }
  }

  return input.tape().record(
      std::move(out), {input, weights, bias},
      [input, weights, bias, B, T, Cin, Cout, K](Tape& tape, std::size_t self) {
        const Grid3& gy = tape.grad_of(self);
        const Grid3& x = input.value();
        const Grid3& w = weights.value();
        if (bias.requires_grad()) {
          auto gb = detail::row_vector(tape.grad_of(bias.id()).ptr(), Cout);
          for (std::size_t b = 0; b < B; ++b)
            gb += detail::matrix(gy.ptr() + b * T * Cout, T, Cout).colwise().sum();
        }
        for (std::size_t k = 0; k < K; ++k) {
          const std::size_t shift = K - 1 - k;
          if (shift >= T) continue;
          for (std::size_t b = 0; b < B; ++b) {
            auto gyb = detail::matrix(gy.ptr() + b * T * Cout, T, Cout);
            if (weights.requires_grad()) {
              auto gw = detail::matrix(tape.grad_of(weights.id()).ptr() + k * Cin * Cout, Cin, Cout);
              gw.noalias() +=
                  detail::matrix(x.ptr() + b * T * Cin, T, Cin).topRows(T - shift).transpose() *
                  gyb.bottomRows(T - shift);
            }
            if (input.requires_grad()) {
              auto gx = detail::matrix(tape.grad_of(input.id()).ptr() + b * T * Cin, T, Cin);
              gx.topRows(T - shift).noalias() +=
                  gyb.bottomRows(T - shift) *
                  detail::matrix(w.ptr() + k * Cin * Cout, Cin, Cout).transpose();
            }
          }
        }
      });
}

Var batch_norm1d(Var input, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var,
                 Mode mode, const BatchNormOptions& options) {
  const Shape in = input.shape();
  const std::size_t C = in.channels;
  const std::size_t N = in.batch * in.time;
  if (gamma.shape() != Shape{1, 1, C} || beta.shape() != Shape{1, 1, C}) {
    throw std::invalid_argument("batch_norm1d: gamma/beta shapes " + gamma.shape().to_string() +
                                "/" + beta.shape().to_string() + " do not match input " +
                                in.to_string());
  }
  if (running_mean.value.size() != C || running_var.value.size() != C) {
    throw std::invalid_argument("batch_norm1d: running statistics do not match " +
                                std::to_string(C) + " channels");
  }
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("batch_norm1d: epsilon must be > 0");
  if (N == 0) throw std::invalid_argument("batch_norm1d: empty input");

  const Grid3& x = input.value();
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  if (mode == Mode::train) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) mean[c] += x[n * C + c];
    for (double& m : mean) m /= static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < C; ++c) {
        const double d = x[n * C + c] - mean[c];
        var[c] += d * d;
      }
    for (double& v : var) v /= static_cast<double>(N);
    for (std::size_t c = 0; c < C; ++c) {
      running_mean.value[c] =
          (1.0 - options.momentum) * running_mean.value[c] + options.momentum * mean[c];
      running_var.value[c] =
          (1.0 - options.momentum) * running_var.value[c] + options.momentum * var[c];
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean.value[c];
      var[c] = running_var.value[c];
    }
  }

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + options.epsilon);

  Grid3 xhat(in), out(in);
  const Grid3& g = gamma.value();
  const Grid3& be = beta.value();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const double h = (x[n * C + c] - mean[c]) * inv_std[c];
      xhat[n * C + c] = h;
      out[n * C + c] = g[c] * h + be[c];
    }

  const bool batch_stats = mode == Mode::train;
  return input.tape().record(
      std::move(out), {input, gamma, beta},
      [input, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), N, C,
       batch_stats](Tape& tape, std::size_t self) {
        const Grid3& gy = tape.grad_of(self);
        std::vector<double> sum_gy(C, 0.0), sum_gy_xhat(C, 0.0);
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t c = 0; c < C; ++c) {
            sum_gy[c] += gy[n * C + c];
            sum_gy_xhat[c] += gy[n * C + c] * xhat[n * C + c];
          }
        if (gamma.requires_grad()) {
          Grid3& gg = tape.grad_of(gamma.id());
          for (std::size_t c = 0; c < C; ++c) gg[c] += sum_gy_xhat[c];
        }
        if (beta.requires_grad()) {
          Grid3& gb = tape.grad_of(beta.id());
          for (std::size_t c = 0; c < C; ++c) gb[c] += sum_gy[c];
        }
        if (!input.requires_grad()) return;
        Grid3& gx = tape.grad_of(input.id());
        const Grid3& gam = gamma.value();
        const double inv_n = 1.0 / static_cast<double>(N);
        for (std::size_t n = 0; n < N; ++n)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t i = n * C + c;
            const double scale = gam[c] * inv_std[c];
            if (batch_stats) {
              gx[i] += scale * (gy[i] - sum_gy[c] * inv_n - xhat[i] * sum_gy_xhat[c] * inv_n);
            } else {
              gx[i] += scale * gy[i];
            }
          }
      });
}

Var activation(Var input, Activation kind) {
  const Grid3& x = input.value();
  Grid3 out(x.shape());
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        // Branching keeps exp() from overflowing for large |x|.
        if (x[i] >= 0.0) {
          out[i] = 1.0 / (1.0 + std::exp(-x[i]));
        } else {
          const double e = std::exp(x[i]);
          out[i] = e / (1.0 + e);
        }
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Activation::linear:
      out = x;
      break;
  }
  return input.tape().record(std::move(out), {input}, [input, kind](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    const Grid3& y = tape.value(self);
    const Grid3& x = input.value();
    Grid3& gx = tape.grad_of(input.id());
    for (std::size_t i = 0; i < gy.size(); ++i) {
      switch (kind) {
        case Activation::relu: gx[i] += x[i] > 0.0 ? gy[i] : 0.0; break;
        case Activation::sigmoid: gx[i] += gy[i] * y[i] * (1.0 - y[i]); break;
        case Activation::tanh: gx[i] += gy[i] * (1.0 - y[i] * y[i]); break;
        case Activation::linear: gx[i] += gy[i]; break;
      }
    }
  });
}

Var max_pool1d(Var input, std::size_t pool) {
  const Shape in = input.shape();
  if (pool < 1) throw std::invalid_argument("max_pool1d: pool size must be >= 1");
  if (in.time < pool || in.time < 2) {
    throw std::invalid_argument("max_pool1d: sequence length " + std::to_string(in.time) +
                                " is shorter than pool size " + std::to_string(std::max<std::size_t>(pool, 2)));
  }
  const std::size_t B = in.batch, C = in.channels, To = in.time / pool;
  const Grid3& x = input.value();
  Grid3 out({B, To, C});
  std::vector<std::uint32_t> argmax(out.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < To; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = j * pool;
        for (std::size_t k = 1; k < pool; ++k)
          if (x.at(b, j * pool + k, c) > x.at(b, best, c)) best = j * pool + k;
        out.at(b, j, c) = x.at(b, best, c);
        argmax[(b * To + j) * C + c] = static_cast<std::uint32_t>(best);
      }
  return input.tape().record(
      std::move(out), {input},
      [input, argmax = std::move(argmax), B, To, C](Tape& tape, std::size_t self) {
        const Grid3& gy = tape.grad_of(self);
        Grid3& gx = tape.grad_of(input.id());
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t j = 0; j < To; ++j)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t i = (b * To + j) * C + c;
              gx.at(b, argmax[i], c) += gy[i];
            }
      });
}

Var upsample_repeat(Var input, std::size_t size) {
  if (size < 1) throw std::invalid_argument("upsample_repeat: size must be >= 1");
  const Shape in = input.shape();
  const std::size_t B = in.batch, T = in.time, C = in.channels;
  const Grid3& x = input.value();
  Grid3 out({B, T * size, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < C; ++c) out.at(b, t * size + r, c) = x.at(b, t, c);
  return input.tape().record(std::move(out), {input},
                             [input, B, T, C, size](Tape& tape, std::size_t self) {
                               const Grid3& gy = tape.grad_of(self);
                               Grid3& gx = tape.grad_of(input.id());
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t t = 0; t < T; ++t)
                                   for (std::size_t r = 0; r < size; ++r)
                                     for (std::size_t c = 0; c < C; ++c)
                                       gx.at(b, t, c) += gy.at(b, t * size + r, c);
                             });
}

Var concat_channels(Var a, Var b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.batch != sb.batch || sa.time != sb.time) {
    throw std::invalid_argument("concat_channels: length mismatch, first input has " +
                                std::to_string(sa.time) + " steps " + sa.to_string() +
                                ", second has " + std::to_string(sb.time) + " steps " +
                                sb.to_string());
  }
  const std::size_t N = sa.batch * sa.time, C1 = sa.channels, C2 = sb.channels;
  const Grid3& xa = a.value();
  const Grid3& xb = b.value();
  Grid3 out({sa.batch, sa.time, C1 + C2});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C1; ++c) out[n * (C1 + C2) + c] = xa[n * C1 + c];
    for (std::size_t c = 0; c < C2; ++c) out[n * (C1 + C2) + C1 + c] = xb[n * C2 + c];
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, N, C1, C2](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    if (a.requires_grad()) {
      Grid3& ga = tape.grad_of(a.id());
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C1; ++c) ga[n * C1 + c] += gy[n * (C1 + C2) + c];
    }
    if (b.requires_grad()) {
      Grid3& gb = tape.grad_of(b.id());
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C2; ++c) gb[n * C2 + c] += gy[n * (C1 + C2) + C1 + c];
    }
  });
}

Var dense_timewise(Var input, Var weights, Var bias) {
  const Shape in = input.shape();
  const Shape ws = weights.shape();
  if (ws.batch != 1 || ws.time != in.channels) {
    throw std::invalid_argument("dense_timewise: input shape " + in.to_string() +
                                " incompatible with weights shape " + ws.to_string());
  }
  if (bias.shape() != Shape{1, 1, ws.channels}) {
    throw std::invalid_argument("dense_timewise: bias shape " + bias.shape().to_string() +
                                " does not match weights shape " + ws.to_string());
  }
  const std::size_t N = in.batch * in.time, Cin = in.channels, Cout = ws.channels;
  Grid3 out({in.batch, in.time, Cout});
  auto y = detail::matrix(out.ptr(), N, Cout);
  y.rowwise() = detail::row_vector(bias.value().ptr(), Cout);
  y.noalias() += detail::matrix(input.value().ptr(), N, Cin) *
                 detail::matrix(weights.value().ptr(), Cin, Cout);
  return input.tape().record(
      std::move(out), {input, weights, bias},
      [input, weights, bias, N, Cin, Cout](Tape& tape, std::size_t self) {
        auto gy = detail::matrix(tape.grad_of(self).ptr(), N, Cout);
        if (bias.requires_grad())
          detail::row_vector(tape.grad_of(bias.id()).ptr(), Cout) += gy.colwise().sum();
        if (weights.requires_grad())
          detail::matrix(tape.grad_of(weights.id()).ptr(), Cin, Cout).noalias() +=
              detail::matrix(input.value().ptr(), N, Cin).transpose() * gy;
        if (input.requires_grad())
          detail::matrix(tape.grad_of(input.id()).ptr(), N, Cin).noalias() +=
              gy * detail::matrix(weights.value().ptr(), Cin, Cout).transpose();
      });
}

Var pad_time(Var input, std::size_t length) {
  const Shape in = input.shape();
  if (length < in.time) {
    throw std::invalid_argument("pad_time: target length " + std::to_string(length) +
                                " shorter than input length " + std::to_string(in.time));
  }
  const std::size_t B = in.batch, T = in.time, C = in.channels;
  Grid3 out({B, length, C});
  const Grid3& x = input.value();
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(x.ptr() + b * T * C, T * C, out.ptr() + b * length * C);
  return input.tape().record(std::move(out), {input},
                             [input, B, T, C, length](Tape& tape, std::size_t self) {
                               const Grid3& gy = tape.grad_of(self);
                               Grid3& gx = tape.grad_of(input.id());
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t i = 0; i < T * C; ++i)
                                   gx[b * T * C + i] += gy[b * length * C + i];
                             });
}

Var crop_time(Var input, std::size_t length) {
  const Shape in = input.shape();
  if (length > in.time) {
    throw std::invalid_argument("crop_time: target length " + std::to_string(length) +
                                " exceeds input length " + std::to_string(in.time));
  }
  const std::size_t B = in.batch, T = in.time, C = in.channels;
  Grid3 out({B, length, C});
  const Grid3& x = input.value();
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(x.ptr() + b * T * C, length * C, out.ptr() + b * length * C);
  return input.tape().record(std::move(out), {input},
                             [input, B, T, C, length](Tape& tape, std::size_t self) {
                               const Grid3& gy = tape.grad_of(self);
                               Grid3& gx = tape.grad_of(input.id());
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t i = 0; i < length * C; ++i)
                                   gx[b * T * C + i] += gy[b * length * C + i];
                             });
}

Var select_channel(Var input, std::size_t channel) {
  const Shape in = input.shape();
  if (channel >= in.channels) {
    throw std::invalid_argument("select_channel: channel " + std::to_string(channel) +
                                " out of range for shape " + in.to_string());
  }
  const std::size_t N = in.batch * in.time, C = in.channels;
  Grid3 out({in.batch, in.time, 1});
  const Grid3& x = input.value();
  for (std::size_t n = 0; n < N; ++n) out[n] = x[n * C + channel];
  return input.tape().record(std::move(out), {input},
                             [input, N, C, channel](Tape& tape, std::size_t self) {
                               const Grid3& gy = tape.grad_of(self);
                               Grid3& gx = tape.grad_of(input.id());
                               for (std::size_t n = 0; n < N; ++n) gx[n * C + channel] += gy[n];
                             });
}

Var affine(Var input, double scale, double offset) {
  const Grid3& x = input.value();
  Grid3 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i] + offset;
  return input.tape().record(std::move(out), {input}, [input, scale](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    Grid3& gx = tape.grad_of(input.id());
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += scale * gy[i];
  });
}

Var channel_affine(Var input, const std::vector<double>& scale, const std::vector<double>& offset) {
  const std::size_t C = input.shape().channels;
  if (scale.size() != C || offset.size() != C) {
    throw std::invalid_argument("channel_affine: expected " + std::to_string(C) +
                                " scale/offset pairs for shape " + input.shape().to_string());
  }
  const Grid3& x = input.value();
  Grid3 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale[i % C] * x[i] + offset[i % C];
  return input.tape().record(std::move(out), {input}, [input, scale, C](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    Grid3& gx = tape.grad_of(input.id());
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += scale[i % C] * gy[i];
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.shape(), b.shape());
  const Grid3& xa = a.value();
  const Grid3& xb = b.value();
  Grid3 out(xa.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + xb[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Grid3 gy = tape.grad_of(self);
    accumulate(tape, a, gy);
    accumulate(tape, b, gy);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.shape(), b.shape());
  const Grid3& xa = a.value();
  const Grid3& xb = b.value();
  Grid3 out(xa.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] - xb[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Grid3& gy = tape.grad_of(self);
    if (a.requires_grad()) {
      Grid3& ga = tape.grad_of(a.id());
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (b.requires_grad()) {
      Grid3& gb = tape.grad_of(b.id());
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var add_constant(Var a, const Grid3& c) {
  require_same_shape("add_constant", a.shape(), c.shape());
  const Grid3& xa = a.value();
  Grid3 out(xa.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + c[i];
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    const Grid3 gy = tape.grad_of(self);
    accumulate(tape, a, gy);
  });
}

Var mean_square(Var input) {
  const Grid3& x = input.value();
  if (x.size() == 0) throw std::invalid_argument("mean_square: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
  const double n = static_cast<double>(x.size());
  return input.tape().record(Grid3({1, 1, 1}, s / n), {input},
                             [input, n](Tape& tape, std::size_t self) {
                               const double g = tape.grad_of(self)[0];
                               const Grid3& x = input.value();
                               Grid3& gx = tape.grad_of(input.id());
                               for (std::size_t i = 0; i < x.size(); ++i) gx[i] += 2.0 * g * x[i] / n;
                             });
}

Var sum(Var input) {
  const Grid3& x = input.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
  return input.tape().record(Grid3({1, 1, 1}, s), {input}, [input](Tape& tape, std::size_t self) {
    const double g = tape.grad_of(self)[0];
    Grid3& gx = tape.grad_of(input.id());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var weighted_sum(const std::vector<std::pair<double, Var>>& terms) {
  if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
  std::vector<Var> inputs;
  double s = 0.0;
  for (const auto& [w, v] : terms) {
    if (v.value().size() != 1) {
      throw std::invalid_argument("weighted_sum: term is not a scalar, shape " +
                                  v.shape().to_string());
    }
    s += w * v.value()[0];
    inputs.push_back(v);
  }
  Tape& tape = terms.front().second.tape();
  return tape.record(Grid3({1, 1, 1}, s), inputs, [terms](Tape& tape, std::size_t self) {
    const double g = tape.grad_of(self)[0];
    for (const auto& [w, v] : terms)
      if (v.requires_grad()) tape.grad_of(v.id())[0] += w * g;
  });
}

}  // namespace phyulstm
