#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "phyulstm/autodiff.hpp"
#include "phyulstm/ops.hpp"

namespace phyulstm {

using Rng = std::mt19937_64;

/// Fills `p` with U(-limit, limit).
void init_uniform(Parameter& p, double limit, Rng& rng);

/// Timewise fully connected layer.
struct DenseParams {
  Parameter weight;  // (1, Cin, Cout)
  Parameter bias;    // (1, 1, Cout)
  Activation act = Activation::linear;

  DenseParams() = default;
  DenseParams(const std::string& prefix, std::size_t in, std::size_t out, Activation a);

  std::size_t inputs() const { return weight.value.time(); }
  std::size_t outputs() const { return weight.value.channels(); }
  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

Var dense_forward(Var input, DenseParams& p);

/// Gate order throughout is forget, input, candidate, output.
enum Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

struct LstmCellParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::array<Parameter, 4> w_x;  // (1, Cin, H) each
  std::array<Parameter, 4> w_h;  // (1, H, H) each
  std::array<Parameter, 4> b;    // (1, 1, H) each

  LstmCellParams() = default;
  LstmCellParams(const std::string& prefix, std::size_t in, std::size_t hidden_units);

  /// U(+-1/sqrt(fan_in)) weights, zero biases except forget bias = 1.
  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

/// h and c, each (B, 1, H).
struct LstmState {
  Var h;
  Var c;
};

/// Hidden states of every step plus the final cell state.
struct LstmSequence {
  Var hidden;     // (B, T, H)
  Var last_cell;  // (B, 1, H)
};

/// One step of the recurrence. x_t: (B, 1, Cin).
LstmState lstm_cell_step(Var x_t, LstmState prev, LstmCellParams& params);

/// Unrolls the cell over all T steps with shared parameters (full BPTT).
/// A default-constructed `init` means h0 = c0 = 0.
LstmSequence lstm_layer_forward(Var seq, LstmCellParams& params, LstmState init = {});

/// Stack of LSTM layers, hidden dense layers, and a linear output head.
struct DeepLstmParams {
  std::vector<LstmCellParams> layers;
  std::vector<DenseParams> dense;
  DenseParams head;

  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

struct DeepLstmSpec {
  std::size_t input = 3;
  std::vector<std::size_t> lstm_units{100, 100};
  std::vector<std::size_t> dense_units{100};
  std::size_t outputs = 3;
};

DeepLstmParams make_deep_lstm(const DeepLstmSpec& spec);

Var deep_lstm_forward(Var seq, DeepLstmParams& stack);

}  // namespace phyulstm
