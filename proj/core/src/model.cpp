#include "phyulstm/model.hpp"

#include <stdexcept>
#include <string>

namespace phyulstm {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::full_state: return "full-state";
    case Regime::accel_only: return "accel-only";
    case Regime::data_driven: return "data-driven";
  }
  return "full-state";
}

Regime parse_regime(std::string_view s) {
  if (s == "full-state" || s == "full_state") return Regime::full_state;
  if (s == "accel-only" || s == "accel_only") return Regime::accel_only;
  if (s == "data-driven" || s == "data_driven") return Regime::data_driven;
  throw std::invalid_argument("unknown regime '" + std::string(s) +
                              "' (expected full-state, accel-only or data-driven)");
}

void ModelSpec::validate() const {
  unet.validate();
  if (lstm_units.empty()) throw std::invalid_argument("ModelSpec: at least one LSTM layer required");
  for (std::size_t u : lstm_units)
    if (u < 1) throw std::invalid_argument("ModelSpec: LSTM widths must be positive");
  for (std::size_t u : dense_units)
    if (u < 1) throw std::invalid_argument("ModelSpec: dense widths must be positive");
  if (!(batch_norm.epsilon > 0.0)) throw std::invalid_argument("ModelSpec: batch-norm epsilon must be > 0");
}

Surrogate::Surrogate(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  unet = make_unet(spec_.unet);
  lstm = make_deep_lstm({spec_.unet.out_channels, spec_.lstm_units, spec_.dense_units, 3});
}

void Surrogate::initialize(std::uint64_t seed) {
  Rng rng(seed);
  unet.initialize(rng);
  lstm.initialize(rng);
}

Var Surrogate::forward(Var input, Mode mode) {
  Var features = unet_forward(input, unet, spec_.unet, mode, spec_.batch_norm);
  return deep_lstm_forward(features, lstm);
}

std::vector<Parameter*> Surrogate::parameters() {
  auto out = unet.parameters();
  for (Parameter* p : lstm.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Surrogate::parameters() const {
  auto all = const_cast<Surrogate*>(this)->parameters();
  return {all.begin(), all.end()};
}

std::vector<Parameter*> Surrogate::trainable() {
  std::vector<Parameter*> out;
  for (Parameter* p : parameters())
    if (p->trainable) out.push_back(p);
  return out;
}

}  // namespace phyulstm
