#include "phyulstm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "phyulstm/differentiator.hpp"
#include "phyulstm/log.hpp"
#include "serialization.hpp"

namespace phyulstm {

namespace {

/// Tensors for one forward pass over equally long records.
struct Batch {
  Grid3 input;       // normalized ag (B, T, 1)
  Grid3 measured;    // normalized x, v, g (B, T, 3); full-state only
  Grid3 ag;          // physical ag (B, T, 1)
  Grid3 accel;       // measured relative acceleration (B, T, 1); accel regimes only
  std::size_t steps = 0;
};

std::size_t common_length(std::span<const GroundMotionRecord* const> records) {
  if (records.empty()) throw std::invalid_argument("no records supplied");
  const std::size_t T = records.front()->size();
  for (const auto* r : records) {
    if (r->size() != T) {
      throw std::invalid_argument("records must share one length: " + records.front()->id + " has " +
                                  std::to_string(T) + " samples, " + r->id + " has " +
                                  std::to_string(r->size()));
    }
  }
  return T;
}

void require_channels(std::span<const GroundMotionRecord* const> records, Regime regime) {
  for (const auto* r : records) {
    if (regime == Regime::full_state) {
      if (!r->x || !r->v || !r->g)
        throw std::invalid_argument(std::string("regime ") + to_string(regime) + " needs x, v and g; record " +
                                    r->id + " lacks them");
    } else if (!r->a) {
      throw std::invalid_argument(std::string("regime ") + to_string(regime) +
                                  " needs measured acceleration; record " + r->id + " lacks it");
    }
  }
}

Batch make_batch(std::span<const GroundMotionRecord* const> records, const Normalizer& norm, Regime regime) {
  const std::size_t B = records.size(), T = common_length(records);
  Batch batch;
  batch.steps = T;
  batch.input = Grid3({B, T, 1});
  batch.ag = Grid3({B, T, 1});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      batch.ag.at(b, t, 0) = records[b]->ag[t];
      batch.input.at(b, t, 0) = norm.ag.apply(records[b]->ag[t]);
    }
  if (regime == Regime::full_state) {
    batch.measured = Grid3({B, T, 3});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        batch.measured.at(b, t, 0) = norm.x.apply((*records[b]->x)[t]);
        batch.measured.at(b, t, 1) = norm.v.apply((*records[b]->v)[t]);
        batch.measured.at(b, t, 2) = norm.g.apply((*records[b]->g)[t]);
      }
  } else {
    batch.accel = Grid3({B, T, 1});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) batch.accel.at(b, t, 0) = (*records[b]->a)[t];
  }
  return batch;
}

Var denormalize(Var pred, const Normalizer& n) {
  return channel_affine(pred, {n.x.scale, n.v.scale, n.g.scale}, {n.x.offset, n.v.offset, n.g.offset});
}

LossTerms batch_loss(Tape& tape, Surrogate& model, const Normalizer& norm, const Batch& batch,
                     const TrainConfig& config, const FdMatrix& fd, Mode mode) {
  Var input = tape.constant(batch.input);
  Var pred = model.forward(input, mode);
  Var physical = denormalize(pred, norm);
  switch (config.regime) {
    case Regime::full_state:
      return combined_loss(pred, batch.measured, {}, physical, fd, batch.ag, config.gamma, config.w1,
                           config.w2);
    case Regime::accel_only:
      return accel_only_loss(physical, batch.accel, fd, batch.ag, config.gamma);
    case Regime::data_driven:
      return datadriven_loss(select_channel(physical, 0), batch.accel, fd);
  }
  throw std::logic_error("unhandled regime");
}

std::vector<Grid3> snapshot(Surrogate& model) {
  std::vector<Grid3> out;
  for (Parameter* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore(Surrogate& model, const std::vector<Grid3>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

double clip_gradients(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

LossBreakdown accumulate_breakdown(const std::vector<std::pair<double, LossBreakdown>>& parts) {
  LossBreakdown out = parts.front().second;
  double wsum = 0.0;
  for (const auto& [w, _] : parts) wsum += w;
  out.total = 0.0;
  for (auto& c : out.components) c.value = 0.0;
  for (const auto& [w, b] : parts) {
    out.total += w / wsum * b.total;
    for (std::size_t i = 0; i < out.components.size(); ++i)
      out.components[i].value += w / wsum * b.components[i].value;
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw std::invalid_argument("TrainConfig: Adam betas must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("TrainConfig: Adam epsilon must be > 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (!(min_delta >= 0.0)) throw std::invalid_argument("TrainConfig: min_delta must be >= 0");
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) throw std::invalid_argument("TrainConfig: loss weights must be >= 0");
  if (!(clip_norm >= 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be >= 0");
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config,
               std::size_t t) {
  if (t < 1) throw std::invalid_argument("adam_step: step index is 1-based");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.grad.shape() != p.value.shape() || state.m[k].shape() != p.value.shape())
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + p.name);
    Grid3& m = state.m[k];
    Grid3& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      p.value[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    }
  }
  state.step = t;
}

LossTerms regime_loss(Tape& tape, Surrogate& model, const Normalizer& normalizer,
                      std::span<const GroundMotionRecord* const> records, const TrainConfig& config,
                      Mode mode) {
  require_channels(records, config.regime);
  const Batch batch = make_batch(records, normalizer, config.regime);
  const FdMatrix fd(batch.steps, records.front()->dt);
  return batch_loss(tape, model, normalizer, batch, config, fd, mode);
}

TrainResult train(const RecordCollection& data, const TrainConfig& config, const ModelSpec& spec,
                  const EpochCallback& on_epoch) {
  config.validate();
  spec.validate();
  const auto train_recs = data.take(Split::train);
  const auto val_recs = data.take(Split::val);
  if (train_recs.empty()) throw std::invalid_argument("train: the dataset has no training records");
  require_channels(train_recs, config.regime);
  if (!val_recs.empty()) require_channels(val_recs, config.regime);

  const std::size_t T = common_length(train_recs);
  if (!val_recs.empty() && common_length(val_recs) != T)
    throw std::invalid_argument("train: validation records differ in length from training records");
  const double dt = train_recs.front()->dt;
  for (const auto* r : train_recs)
    if (std::abs(r->dt - dt) > 1e-9 * dt) throw std::invalid_argument("train: records differ in dt");
  if (T < spec.unet.block()) {
    throw std::invalid_argument("train: records have " + std::to_string(T) + " samples, need at least " +
                                std::to_string(spec.unet.block()));
  }

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.model = Surrogate(spec);
  ck.model.initialize(config.seed);
  ck.normalizer = fit_normalizer(train_recs, config.regime == Regime::full_state, config.gamma);
  ck.regime = config.regime;
  ck.dt = dt;
  ck.steps = T;
  ck.config = config;

  const FdMatrix fd(T, dt);
  const std::size_t n_train = train_recs.size();
  const bool full_batch = config.batch_size == 0 || config.batch_size >= n_train;
  const Batch full = make_batch(train_recs, ck.normalizer, config.regime);
  std::optional<Batch> val_batch;
  if (!val_recs.empty()) val_batch = make_batch(val_recs, ck.normalizer, config.regime);

  Surrogate& model = ck.model;
  const auto params = model.trainable();
  AdamState adam;
  std::mt19937_64 order_rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  std::vector<Grid3> best = snapshot(model);
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t step = 0, last_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    std::vector<std::pair<double, LossBreakdown>> parts;
    bool finite = true;
    bool snapshot_taken = false;

    std::vector<std::vector<std::size_t>> batches;
    if (full_batch) {
      batches.push_back(order);
    } else {
      std::shuffle(order.begin(), order.end(), order_rng);
      for (std::size_t s = 0; s < n_train; s += config.batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, s + config.batch_size)));
    }

    for (const auto& idx : batches) {
      std::optional<Batch> sub;
      if (!full_batch) {
        std::vector<const GroundMotionRecord*> recs;
        for (std::size_t i : idx) recs.push_back(train_recs[i]);
        sub = make_batch(recs, ck.normalizer, config.regime);
      }
      const Batch& batch = full_batch ? full : *sub;
      for (Parameter* p : params) p->zero_grad();
      Tape tape;
      LossTerms loss = batch_loss(tape, model, ck.normalizer, batch, config, fd, Mode::train);
      if (!std::isfinite(loss.breakdown.total)) {
        finite = false;
        break;
      }
      tape.backward(loss.total);
      parts.emplace_back(static_cast<double>(idx.size()), loss.breakdown);

      // Full batch without validation: the loss just computed belongs to the
      // current parameters, so that is the state worth keeping.
      if (full_batch && !val_batch && loss.breakdown.total < best_loss - config.min_delta) {
        best_loss = loss.breakdown.total;
        best = snapshot(model);
        result.best_epoch = epoch;
        last_improvement = epoch;
        entry.improved = true;
        snapshot_taken = true;
      }
      clip_gradients(params, config.clip_norm);
      adam_step(params, adam, config, ++step);
    }

    if (!finite) {
      log::warn("train: non-finite loss at epoch " + std::to_string(epoch) +
                "; restoring best parameters");
      result.diverged = true;
      break;
    }
    entry.train = accumulate_breakdown(parts);

    if (val_batch) {
      Tape tape;
      entry.val = batch_loss(tape, model, ck.normalizer, *val_batch, config, fd, Mode::infer).breakdown;
      if (!std::isfinite(entry.val->total)) {
        result.diverged = true;
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
        break;
      }
    }
    if (!snapshot_taken && (val_batch || !full_batch)) {
      const double monitored = val_batch ? entry.val->total : entry.train.total;
      if (monitored < best_loss - config.min_delta) {
        best_loss = monitored;
        best = snapshot(model);
        result.best_epoch = epoch;
        last_improvement = epoch;
        entry.improved = true;
      }
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (epoch - last_improvement >= config.patience) {
      log::info("train: early stop at epoch " + std::to_string(epoch));
      break;
    }
  }

  restore(model, best);
  for (Parameter* p : model.parameters()) p->zero_grad();
  result.best_loss = result.best_epoch > 0 ? best_loss : std::numeric_limits<double>::quiet_NaN();

  ck.metrics["epochs_run"] = static_cast<double>(result.log.size());
  ck.metrics["best_epoch"] = static_cast<double>(result.best_epoch);
  ck.metrics["diverged"] = result.diverged ? 1.0 : 0.0;
  if (result.best_epoch > 0) {
    ck.metrics["best_loss"] = best_loss;
    const EpochLog& b = result.log[result.best_epoch - 1];
    for (const auto& c : b.train.components) ck.metrics["train." + c.name] = c.value;
    if (b.val)
      for (const auto& c : b.val->components) ck.metrics["val." + c.name] = c.value;
  }
  return result;
}

std::vector<StateTrajectory> predict_batch(const Checkpoint& ck, const std::vector<std::span<const double>>& ag,
                                           double dt) {
  if (ag.empty()) return {};
  const std::size_t B = ag.size(), T = ag.front().size();
  for (const auto& s : ag)
    if (s.size() != T) throw std::invalid_argument("predict_batch: series must share one length");
  if (T < std::max<std::size_t>(ck.model.spec().unet.block(), 3)) {
    throw std::invalid_argument("predict: series of " + std::to_string(T) + " samples is too short");
  }
  if (ck.dt > 0.0 && std::abs(dt - ck.dt) > 1e-9) {
    log::warn("predict: dt " + format_real(dt) + " differs from training dt " + format_real(ck.dt) +
              "; differentiator rebuilt for the new grid");
  }
  const FdMatrix fd(T, dt);
  Grid3 input({B, T, 1});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) input.at(b, t, 0) = ck.normalizer.ag.apply(ag[b][t]);

  Surrogate model = ck.model;  // forward() needs mutable parameters; inference leaves them untouched
  Tape tape;
  Var pred = denormalize(model.forward(tape.constant(std::move(input)), Mode::infer), ck.normalizer);
  const Grid3& z = pred.value();
  const double gamma = ck.config.gamma;

  std::vector<StateTrajectory> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    StateTrajectory& tr = out[b];
    tr.dt = dt;
    tr.t.resize(T);
    for (std::size_t t = 0; t < T; ++t) tr.t[t] = static_cast<double>(t) * dt;
    tr.ag.assign(ag[b].begin(), ag[b].end());
    tr.x = z.series(b, 0);
    if (ck.regime == Regime::data_driven) {
      tr.v = fd.apply(tr.x);
      tr.a = fd.apply(tr.v);
      tr.g.resize(T);
      for (std::size_t t = 0; t < T; ++t) tr.g[t] = -tr.a[t] - gamma * tr.ag[t];
    } else {
      tr.v = z.series(b, 1);
      tr.g = z.series(b, 2);
      tr.a = fd.apply(tr.v);
    }
  }
  return out;
}

StateTrajectory predict(const Checkpoint& ck, std::span<const double> ag, double dt) {
  return predict_batch(ck, {ag}, dt).front();
}

std::string config_to_json(const TrainConfig& config, const ModelSpec& spec) {
  detail::json j{{"train", detail::to_json(config)}, {"model", detail::to_json(spec)}};
  return j.dump(2);
}

void apply_config_json(std::string_view text, TrainConfig& config, ModelSpec& spec) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "train" && key != "model") throw std::invalid_argument("config: unknown section '" + key + "'");
  try {
    if (j.contains("train")) config = detail::train_config_from_json(j["train"], config);
    if (j.contains("model")) spec = detail::model_spec_from_json(j["model"], spec);
  } catch (const detail::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  config.validate();
  spec.validate();
}

}  // namespace phyulstm
