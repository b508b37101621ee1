#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "phyulstm/autodiff.hpp"
#include "phyulstm/lstm.hpp"
#include "phyulstm/ops.hpp"

namespace phyulstm {

/// Layer widths of the causal 1D U-Net. Defaults: encoders 50/100,
/// bottleneck 200, decoders 100/50.
struct UNetPlan {
  std::size_t in_channels = 1;
  std::vector<std::size_t> encoder_filters{50, 100};
  std::size_t bottleneck_filters = 200;
  std::vector<std::size_t> decoder_filters{100, 50};
  std::size_t kernel = 2;
  std::size_t pool = 2;
  std::size_t out_channels = 3;

  std::size_t depth() const { return encoder_filters.size(); }
  /// pool^depth: the time-axis granularity the network needs internally.
  std::size_t block() const;
  std::size_t padded_length(std::size_t t) const;
  void validate() const;
};

/// conv1d_causal -> batch_norm1d -> relu.
struct ConvBlockParams {
  Parameter weight;  // (K, Cin, Cout)
  Parameter bias;    // (1, 1, Cout)
  Parameter gamma;
  Parameter beta;
  Parameter running_mean;  // not trainable
  Parameter running_var;   // not trainable

  ConvBlockParams() = default;
  ConvBlockParams(const std::string& prefix, std::size_t in, std::size_t out, std::size_t kernel);

  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

/// Two ConvBlocks in sequence; used by encoders, the bottleneck and decoders.
struct ConvPairParams {
  ConvBlockParams first;
  ConvBlockParams second;

  ConvPairParams() = default;
  ConvPairParams(const std::string& prefix, std::size_t in, std::size_t out, std::size_t kernel);

  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

struct UNetParams {
  std::vector<ConvPairParams> encoders;
  ConvPairParams bottleneck;
  std::vector<ConvPairParams> decoders;
  Parameter out_gate_weight;  // kernel-1 conv, sigmoid
  Parameter out_gate_bias;
  Parameter out_weight;       // kernel-1 conv, linear
  Parameter out_bias;

  void initialize(Rng& rng);
  std::vector<Parameter*> parameters();
};

UNetParams make_unet(const UNetPlan& plan);

Var conv_block_forward(Var input, ConvBlockParams& p, Mode mode, const BatchNormOptions& bn = {});
Var conv_pair_forward(Var input, ConvPairParams& p, Mode mode, const BatchNormOptions& bn = {});

struct EncoderOutput {
  Var skip;
  Var pooled;
};

EncoderOutput encoder_block_forward(Var input, ConvPairParams& p, Mode mode, std::size_t pool = 2,
                                    const BatchNormOptions& bn = {});

Var decoder_block_forward(Var input, Var skip, ConvPairParams& p, Mode mode, std::size_t pool = 2,
                          const BatchNormOptions& bn = {});

/// Input (B, T, in_channels), T >= plan.block(). The time axis is zero
/// padded on the right to a multiple of plan.block() and the output is
/// cropped back to T.
Var unet_forward(Var input, UNetParams& params, const UNetPlan& plan, Mode mode,
                 const BatchNormOptions& bn = {});

/// Same as unet_forward, also exposing the sigmoid-stage activations
/// (padded length) for inspection.
struct UNetTrace {
  Var output;
  Var gate;
};
UNetTrace unet_forward_traced(Var input, UNetParams& params, const UNetPlan& plan, Mode mode,
                              const BatchNormOptions& bn = {});

}  // namespace phyulstm
