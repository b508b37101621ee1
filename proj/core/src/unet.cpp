#include "phyulstm/unet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phyulstm {

std::size_t UNetPlan::block() const {
  std::size_t b = 1;
  for (std::size_t i = 0; i < depth(); ++i) b *= pool;
  return b;
}

std::size_t UNetPlan::padded_length(std::size_t t) const {
  const std::size_t b = block();
  return (t + b - 1) / b * b;
}

void UNetPlan::validate() const {
  if (encoder_filters.empty()) throw std::invalid_argument("UNetPlan: at least one encoder level required");
  if (decoder_filters.size() != encoder_filters.size() ||
      !std::equal(decoder_filters.begin(), decoder_filters.end(), encoder_filters.rbegin())) {
    throw std::invalid_argument("UNetPlan: decoder filters must mirror encoder filters");
  }
  if (kernel < 1 || pool < 2) throw std::invalid_argument("UNetPlan: kernel >= 1 and pool >= 2 required");
  if (in_channels < 1 || out_channels < 1 || bottleneck_filters < 1)
    throw std::invalid_argument("UNetPlan: channel counts must be positive");
  for (std::size_t f : encoder_filters)
    if (f < 1) throw std::invalid_argument("UNetPlan: filter counts must be positive");
}

ConvBlockParams::ConvBlockParams(const std::string& prefix, std::size_t in, std::size_t out,
                                 std::size_t kernel)
    : weight(prefix + ".conv.weight", {kernel, in, out}),
      bias(prefix + ".conv.bias", {1, 1, out}),
      gamma(prefix + ".bn.gamma", {1, 1, out}),
      beta(prefix + ".bn.beta", {1, 1, out}),
      running_mean(prefix + ".bn.running_mean", {1, 1, out}, false),
      running_var(prefix + ".bn.running_var", {1, 1, out}, false) {}

void ConvBlockParams::initialize(Rng& rng) {
  const double fan_in = static_cast<double>(weight.value.batch() * weight.value.time());
  init_uniform(weight, 1.0 / std::sqrt(fan_in), rng);
  bias.value.fill(0.0);
  gamma.value.fill(1.0);
  beta.value.fill(0.0);
  running_mean.value.fill(0.0);
  running_var.value.fill(1.0);
}

std::vector<Parameter*> ConvBlockParams::parameters() {
  return {&weight, &bias, &gamma, &beta, &running_mean, &running_var};
}

ConvPairParams::ConvPairParams(const std::string& prefix, std::size_t in, std::size_t out,
                               std::size_t kernel)
    : first(prefix + ".0", in, out, kernel), second(prefix + ".1", out, out, kernel) {}

void ConvPairParams::initialize(Rng& rng) {
  first.initialize(rng);
  second.initialize(rng);
}

std::vector<Parameter*> ConvPairParams::parameters() {
  auto out = first.parameters();
  for (Parameter* p : second.parameters()) out.push_back(p);
  return out;
}

void UNetParams::initialize(Rng& rng) {
  for (auto& e : encoders) e.initialize(rng);
  bottleneck.initialize(rng);
  for (auto& d : decoders) d.initialize(rng);
  init_uniform(out_gate_weight, 1.0 / std::sqrt(static_cast<double>(out_gate_weight.value.time())), rng);
  out_gate_bias.value.fill(0.0);
  init_uniform(out_weight, 1.0 / std::sqrt(static_cast<double>(out_weight.value.time())), rng);
  out_bias.value.fill(0.0);
}

std::vector<Parameter*> UNetParams::parameters() {
  std::vector<Parameter*> out;
  auto append = [&out](ConvPairParams& p) {
    for (Parameter* q : p.parameters()) out.push_back(q);
  };
  for (auto& e : encoders) append(e);
  append(bottleneck);
  for (auto& d : decoders) append(d);
  out.insert(out.end(), {&out_gate_weight, &out_gate_bias, &out_weight, &out_bias});
  return out;
}

UNetParams make_unet(const UNetPlan& plan) {
  plan.validate();
  UNetParams p;
  std::size_t width = plan.in_channels;
  for (std::size_t l = 0; l < plan.depth(); ++l) {
    p.encoders.emplace_back("unet.enc" + std::to_string(l), width, plan.encoder_filters[l], plan.kernel);
    width = plan.encoder_filters[l];
  }
  p.bottleneck = ConvPairParams("unet.bottleneck", width, plan.bottleneck_filters, plan.kernel);
  width = plan.bottleneck_filters;
  for (std::size_t l = 0; l < plan.depth(); ++l) {
    // The skip of the mirrored encoder level is concatenated before the convs.
    const std::size_t skip = plan.encoder_filters[plan.depth() - 1 - l];
    p.decoders.emplace_back("unet.dec" + std::to_string(l), width + skip, plan.decoder_filters[l],
                            plan.kernel);
    width = plan.decoder_filters[l];
  }
  p.out_gate_weight = Parameter("unet.out_gate.weight", {1, width, plan.out_channels});
  p.out_gate_bias = Parameter("unet.out_gate.bias", {1, 1, plan.out_channels});
  p.out_weight = Parameter("unet.out.weight", {1, plan.out_channels, plan.out_channels});
  p.out_bias = Parameter("unet.out.bias", {1, 1, plan.out_channels});
  return p;
}

Var conv_block_forward(Var input, ConvBlockParams& p, Mode mode, const BatchNormOptions& bn) {
  Tape& tape = input.tape();
  Var y = conv1d_causal(input, tape.parameter(p.weight), tape.parameter(p.bias));
  y = batch_norm1d(y, tape.parameter(p.gamma), tape.parameter(p.beta), p.running_mean, p.running_var,
                   mode, bn);
  return relu(y);
}

Var conv_pair_forward(Var input, ConvPairParams& p, Mode mode, const BatchNormOptions& bn) {
  return conv_block_forward(conv_block_forward(input, p.first, mode, bn), p.second, mode, bn);
}

EncoderOutput encoder_block_forward(Var input, ConvPairParams& p, Mode mode, std::size_t pool,
                                    const BatchNormOptions& bn) {
  if (input.shape().time % pool != 0) {
    throw std::invalid_argument("encoder_block_forward: length " + std::to_string(input.shape().time) +
                                " is not a multiple of pool size " + std::to_string(pool));
  }
  Var skip = conv_pair_forward(input, p, mode, bn);
  return {skip, max_pool1d(skip, pool)};
}

Var decoder_block_forward(Var input, Var skip, ConvPairParams& p, Mode mode, std::size_t pool,
                          const BatchNormOptions& bn) {
  if (input.shape().time * pool != skip.shape().time) {
    throw std::invalid_argument("decoder_block_forward: upsampled length " +
                                std::to_string(input.shape().time * pool) +
                                " does not match skip length " + std::to_string(skip.shape().time));
  }
  Var up = upsample_repeat(input, pool);
  return conv_pair_forward(concat_channels(up, skip), p, mode, bn);
}

UNetTrace unet_forward_traced(Var input, UNetParams& params, const UNetPlan& plan, Mode mode,
                              const BatchNormOptions& bn) {
  const Shape in = input.shape();
  const std::size_t block = plan.block();
  if (in.time < block) {
    throw std::invalid_argument("unet_forward: sequence length " + std::to_string(in.time) +
                                " shorter than the minimum " + std::to_string(block));
  }
  if (in.channels != plan.in_channels) {
    throw std::invalid_argument("unet_forward: input shape " + in.to_string() + " expected " +
                                std::to_string(plan.in_channels) + " channel(s)");
  }
  if (params.encoders.size() != plan.depth() || params.decoders.size() != plan.depth()) {
    throw std::invalid_argument("unet_forward: parameters do not match plan depth");
  }
  Tape& tape = input.tape();
  const std::size_t padded = plan.padded_length(in.time);
  Var x = padded == in.time ? input : pad_time(input, padded);

  std::vector<Var> skips;
  for (auto& enc : params.encoders) {
    EncoderOutput e = encoder_block_forward(x, enc, mode, plan.pool, bn);
    skips.push_back(e.skip);
    x = e.pooled;
  }
  x = conv_pair_forward(x, params.bottleneck, mode, bn);
  for (std::size_t l = 0; l < params.decoders.size(); ++l)
    x = decoder_block_forward(x, skips[skips.size() - 1 - l], params.decoders[l], mode, plan.pool, bn);

  Var gate = sigmoid(conv1d_causal(x, tape.parameter(params.out_gate_weight),
                                   tape.parameter(params.out_gate_bias)));
  Var out = conv1d_causal(gate, tape.parameter(params.out_weight), tape.parameter(params.out_bias));
  if (padded != in.time) out = crop_time(out, in.time);
  return {out, gate};
}

Var unet_forward(Var input, UNetParams& params, const UNetPlan& plan, Mode mode,
                 const BatchNormOptions& bn) {
  return unet_forward_traced(input, params, plan, mode, bn).output;
}

}  // namespace phyulstm
