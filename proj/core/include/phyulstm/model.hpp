#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "phyulstm/lstm.hpp"
#include "phyulstm/ops.hpp"
#include "phyulstm/unet.hpp"

namespace phyulstm {

/// Loss regime, chosen by which measurements are available.
enum class Regime { full_state, accel_only, data_driven };

const char* to_string(Regime r);
/// Accepts "full-state"/"full_state", "accel-only"/"accel_only",
/// "data-driven"/"data_driven".
Regime parse_regime(std::string_view s);

struct ModelSpec {
  UNetPlan unet;
  /// LSTM layer widths and hidden dense widths; input width is
  /// unet.out_channels and the head always emits (x, v, g).
  std::vector<std::size_t> lstm_units{100, 100};
  std::vector<std::size_t> dense_units{100};
  BatchNormOptions batch_norm;

  void validate() const;
};

/// Causal U-Net feeding a deep LSTM stack with a 3-wide linear head.
/// Input: normalized ground acceleration (B, T, 1). Output: normalized
/// (x, v, g) of shape (B, T, 3).
class Surrogate {
 public:
  Surrogate() = default;
  explicit Surrogate(ModelSpec spec);

  void initialize(std::uint64_t seed);

  Var forward(Var input, Mode mode);

  const ModelSpec& spec() const { return spec_; }

  /// Every stored array, trainable or not, in a fixed order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<Parameter*> trainable();

  UNetParams unet;
  DeepLstmParams lstm;

 private:
  ModelSpec spec_;
};

}  // namespace phyulstm
