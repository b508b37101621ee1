#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "phyulstm/autodiff.hpp"

namespace phyulstm {

enum class Mode { train, infer };

enum class Activation { relu, sigmoid, tanh, linear };

Activation parse_activation(std::string_view name);

struct BatchNormOptions {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Causal 1D convolution. weights: (K, Cin, Cout), bias: (1, 1, Cout).
/// Inputs before t = 0 read as zero, so output length equals input length.
Var conv1d_causal(Var input, Var weights, Var bias);

/// Per-channel normalization over every (entry, time) position. In train
/// mode the batch statistics are used and the running statistics are
/// updated in place (running = (1 - momentum) * running + momentum * batch,
/// biased variance); in infer mode the running statistics are used as-is.
Var batch_norm1d(Var input, Var gamma, Var beta, Parameter& running_mean, Parameter& running_var,
                 Mode mode, const BatchNormOptions& options = {});

Var activation(Var input, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::relu); }
inline Var sigmoid(Var x) { return activation(x, Activation::sigmoid); }
inline Var tanh_act(Var x) { return activation(x, Activation::tanh); }

/// Non-overlapping max pooling along time; a trailing partial window is dropped.
/// Backward routes to the earliest maximal index of each window.
Var max_pool1d(Var input, std::size_t pool = 2);

/// Repeats every time step `size` times.
Var upsample_repeat(Var input, std::size_t size = 2);

Var concat_channels(Var a, Var b);

/// Same affine map at every (entry, time) position. weights: (1, Cin, Cout),
/// bias: (1, 1, Cout).
Var dense_timewise(Var input, Var weights, Var bias);

/// Zero right-padding of the time axis to `length` (>= current length).
Var pad_time(Var input, std::size_t length);
/// Keeps the first `length` steps.
Var crop_time(Var input, std::size_t length);

/// Channel `c` as a (B, T, 1) grid.
Var select_channel(Var input, std::size_t c);

/// Elementwise a*x + b with constant scalars.
Var affine(Var input, double scale, double offset);

/// Per-channel y[..., c] = scale[c] * x[..., c] + offset[c].
Var channel_affine(Var input, const std::vector<double>& scale, const std::vector<double>& offset);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a constant grid of identical shape.
Var add_constant(Var a, const Grid3& c);

/// Mean of squared entries, as a (1, 1, 1) scalar.
Var mean_square(Var input);
Var sum(Var input);

/// Scalar linear combination: sum_i w_i * s_i over (1, 1, 1) inputs.
Var weighted_sum(const std::vector<std::pair<double, Var>>& terms);

}  // namespace phyulstm
