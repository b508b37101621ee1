#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phyulstm/datasets.hpp"
#include "phyulstm/dynamics.hpp"
#include "phyulstm/losses.hpp"
#include "phyulstm/model.hpp"

namespace phyulstm {

struct TrainConfig {
  Regime regime = Regime::full_state;
  std::size_t epochs = 5000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// 0 means full-batch updates.
  std::size_t batch_size = 0;
  std::size_t patience = 500;
  double min_delta = 1e-6;
  std::uint64_t seed = 0;
  double w1 = 1.0;
  double w2 = 1.0;
  /// Influence factor of the ground acceleration in the equation of motion.
  double gamma = 1.0;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;

  void validate() const;
};

/// First/second moment buffers, one pair per trainable parameter.
struct AdamState {
  std::vector<Grid3> m;
  std::vector<Grid3> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its grad.
/// `t` is the 1-based step index.
void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config,
               std::size_t t);

/// Everything needed to reproduce predictions of a trained model.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  Surrogate model;
  Normalizer normalizer;
  Regime regime = Regime::full_state;
  double dt = 0.0;
  std::size_t steps = 0;
  TrainConfig config;
  std::map<std::string, double> metrics;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossBreakdown train;
  std::optional<LossBreakdown> val;
  bool improved = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0: initial parameters kept
  double best_loss = 0.0;
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Fits the model on the train split (and monitors val, when present).
/// Records tagged test are never read.
TrainResult train(const RecordCollection& data, const TrainConfig& config, const ModelSpec& spec,
                  const EpochCallback& on_epoch = {});

/// Regime-specific loss of a model on a set of equally long records.
/// Exposed for tests and tooling; used by train().
LossTerms regime_loss(Tape& tape, Surrogate& model, const Normalizer& normalizer,
                      std::span<const GroundMotionRecord* const> records, const TrainConfig& config,
                      Mode mode);

/// Predicted response for one excitation series sampled at dt. For the
/// data-driven regime only x comes from the network; v and a are its
/// finite-difference derivatives and g = -a - gamma*ag. Otherwise x, v, g
/// come from the network and a = D v.
StateTrajectory predict(const Checkpoint& model, std::span<const double> ag, double dt);

/// Batched prediction; all series must share one length.
std::vector<StateTrajectory> predict_batch(const Checkpoint& model,
                                           const std::vector<std::span<const double>>& ag, double dt);

/// TrainConfig and ModelSpec as a JSON object {"train": {...}, "model": {...}}.
std::string config_to_json(const TrainConfig& config, const ModelSpec& spec);
/// Overrides the fields present in a JSON document of the same layout.
void apply_config_json(std::string_view text, TrainConfig& config, ModelSpec& spec);

}  // namespace phyulstm
