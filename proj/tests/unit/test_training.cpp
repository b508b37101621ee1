#include <cmath>

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "phyulstm/training.hpp"

using namespace phyulstm;

namespace {

ModelSpec tiny_spec() {
  ModelSpec s;
  s.unet.encoder_filters = {4, 6};
  s.unet.bottleneck_filters = 8;
  s.unet.decoder_filters = {6, 4};
  s.lstm_units = {8};
  s.dense_units = {8};
  return s;
}

RecordCollection toy_set(std::size_t n, double k2 = 200.0, std::size_t n_train = 2) {
  SyntheticDatasetSpec d;
  d.n_records = n;
  d.duration = 5.0;
  d.seed = 21;
  d.params.k2 = k2;
  RecordCollection c = generate_synthetic_dataset(d);
  split(c, n_train, 4);
  return c;
}

Parameter scalar(double v) {
  Parameter p("p", {1, 1, 1});
  p.value[0] = v;
  return p;
}

}  // namespace

TEST_CASE("adam with zero gradient is a fixed point") {
  Parameter p = scalar(0.3);
  Parameter* ps[] = {&p};
  AdamState st;
  TrainConfig c;
  for (std::size_t t = 1; t <= 3; ++t) adam_step(ps, st, c, t);
  CHECK(p.value[0] == 0.3);
}

TEST_CASE("first adam step moves by about lr against the gradient") {
  Parameter p = scalar(1.0);
  p.grad[0] = 0.5;
  Parameter* ps[] = {&p};
  AdamState st;
  TrainConfig c;
  adam_step(ps, st, c, 1);
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  const double after_one = p.value[0];
  adam_step(ps, st, c, 2);
  CHECK(p.value[0] < after_one);
  CHECK_THROWS(adam_step(ps, st, c, 0));
}

TEST_CASE("train config validation and JSON") {
  TrainConfig c;
  ModelSpec m;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.regime = Regime::accel_only;
  c.epochs = 7;
  c.seed = 99;
  m.lstm_units = {5, 6};
  const std::string text = config_to_json(c, m);
  TrainConfig c2;
  ModelSpec m2;
  apply_config_json(text, c2, m2);
  CHECK(c2.regime == Regime::accel_only);
  CHECK(c2.epochs == 7);
  CHECK(c2.seed == 99);
  CHECK(m2.lstm_units == std::vector<std::size_t>{5, 6});
  CHECK(config_to_json(c2, m2) == text);
  CHECK_THROWS_AS(apply_config_json(R"({"train":{"epochz":3}})", c2, m2), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_json(R"({"optim":{}})", c2, m2), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_json("{", c2, m2), std::invalid_argument);
  apply_config_json(R"({"train":{"learning_rate":0.01}})", c2, m2);
  CHECK(c2.learning_rate == 0.01);
  CHECK(c2.epochs == 7);
}

TEST_CASE("regime parsing") {
  CHECK(parse_regime("accel-only") == Regime::accel_only);
  CHECK(parse_regime("data_driven") == Regime::data_driven);
  CHECK(std::string(to_string(Regime::full_state)) == "full-state");
  CHECK_THROWS(parse_regime("physics"));
}

TEST_CASE("batch grid shapes follow the record layout") {
  SyntheticDatasetSpec d;
  d.n_records = 10;
  d.seed = 1;
  RecordCollection c = generate_synthetic_dataset(d);
  std::vector<const GroundMotionRecord*> recs;
  for (const auto& r : c.records) recs.push_back(&r);
  ModelSpec spec = tiny_spec();
  Surrogate model(spec);
  model.initialize(1);
  Normalizer n = fit_normalizer(recs, true);
  Tape tape;
  TrainConfig cfg;
  LossTerms l = regime_loss(tape, model, n, recs, cfg, Mode::infer);
  CHECK(tape.value(0).shape() == Shape{10, 1001, 1});
  CHECK(std::isfinite(l.breakdown.total));
}

TEST_CASE("zero epochs returns the initialized model") {
  RecordCollection c = toy_set(3);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  TrainResult r = train(c, cfg, tiny_spec());
  Surrogate fresh(tiny_spec());
  fresh.initialize(5);
  auto a = r.checkpoint.model.parameters();
  auto b = fresh.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
}

TEST_CASE("regime channel mismatch is rejected before training") {
  RecordCollection c = toy_set(3);
  for (auto& r : c.records) r.x.reset();
  TrainConfig cfg;
  cfg.epochs = 5;
  CHECK_THROWS_AS(train(c, cfg, tiny_spec()), std::invalid_argument);
  cfg.regime = Regime::accel_only;
  for (auto& r : c.records) r.a.reset();
  CHECK_THROWS_AS(train(c, cfg, tiny_spec()), std::invalid_argument);
}

TEST_CASE("training on a linear toy reduces the loss") {
  RecordCollection c = toy_set(2, 0.0, 1);
  for (auto& r : c.records) r.split = Split::train;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 8;
  TrainResult r = train(c, cfg, ModelSpec{});
  REQUIRE(r.log.size() == 200);
  CHECK(r.best_loss < 0.1 * r.log.front().train.total);
}

TEST_CASE("training is deterministic, never reads test records, and restores the best epoch") {
  RecordCollection c = toy_set(5);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.seed = 12;
  c.reset_access_log();
  TrainResult a = train(c, cfg, tiny_spec());
  for (const auto& [id, n] : c.access_log()) CHECK(c.find(id).split != Split::test);
  TrainResult b = train(c, cfg, tiny_spec());
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].train.total == b.log[i].train.total);

  double lowest = a.log.front().train.total;
  std::size_t at = 1;
  for (const auto& e : a.log)
    if (e.train.total < lowest - cfg.min_delta) {
      lowest = e.train.total;
      at = e.epoch;
    }
  CHECK(a.best_epoch == at);
  CHECK(a.best_loss == lowest);

  // The restored parameters reproduce the best recorded loss.
  Checkpoint ck = a.checkpoint;
  std::vector<const GroundMotionRecord*> train_recs = c.take(Split::train);
  Tape tape;
  double again = regime_loss(tape, ck.model, ck.normalizer, train_recs, cfg, Mode::train).breakdown.total;
  CHECK(again == doctest::Approx(lowest).epsilon(1e-12));
}

TEST_CASE("validation split drives model selection") {
  RecordCollection c = toy_set(5);
  split(c, 2, 4, 1);
  TrainConfig cfg;
  cfg.epochs = 6;
  TrainResult r = train(c, cfg, tiny_spec());
  for (const auto& e : r.log) CHECK(e.val.has_value());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.log) best = std::min(best, e.val->total);
  CHECK(r.best_loss == best);
}

TEST_CASE("mini-batches and early stopping") {
  RecordCollection c = toy_set(5, 200.0, 4);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 2;
  cfg.patience = 1;
  cfg.min_delta = 1e9;
  TrainResult r = train(c, cfg, tiny_spec());
  CHECK(r.log.size() == 2);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("predict") {
  RecordCollection c = toy_set(3);
  TrainConfig cfg;
  cfg.epochs = 2;
  TrainResult r = train(c, cfg, tiny_spec());
  const auto& rec = c.records[2];
  StateTrajectory p = predict(r.checkpoint, rec.ag, rec.dt);
  CHECK(p.x.size() == rec.size());
  CHECK(p.a.size() == rec.size());
  CHECK(p.t.back() == doctest::Approx(rec.dt * static_cast<double>(rec.size() - 1)));
  for (std::size_t T : {4, 5, 9}) {
    std::vector<double> zeros(T, 0.0);
    StateTrajectory z = predict(r.checkpoint, zeros, rec.dt);
    CHECK(z.x.size() == T);
    for (double v : z.g) CHECK(std::isfinite(v));
  }
  CHECK_THROWS_AS(predict(r.checkpoint, std::vector<double>(3, 0.0), rec.dt), std::invalid_argument);

  auto batch = predict_batch(r.checkpoint, {std::span<const double>(c.records[0].ag), std::span<const double>(rec.ag)},
                             rec.dt);
  // Batch composition changes GEMM blocking but not the math.
  for (std::size_t t = 0; t < p.x.size(); ++t) CHECK(std::abs(batch[1].x[t] - p.x[t]) < 1e-12);
}

TEST_CASE("zero input through zero weights emits the head bias") {
  Checkpoint ck;
  ck.model = Surrogate(tiny_spec());
  ck.model.initialize(3);
  for (Parameter* p : ck.model.trainable()) p->value.fill(0.0);
  ck.model.lstm.head.bias.value = Grid3({1, 1, 3}, std::vector<double>{0.1, -0.2, 0.3});
  StateTrajectory p = predict(ck, std::vector<double>(12, 0.0), 0.05);
  for (std::size_t t = 0; t < 12; ++t) {
    CHECK(p.x[t] == 0.1);
    CHECK(p.v[t] == -0.2);
    CHECK(p.g[t] == 0.3);
  }
}

TEST_CASE("data-driven predictions derive v, a and g from x") {
  RecordCollection c = toy_set(3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.regime = Regime::data_driven;
  TrainResult r = train(c, cfg, tiny_spec());
  StateTrajectory p = predict(r.checkpoint, c.records[0].ag, c.records[0].dt);
  FdMatrix fd(p.size(), p.dt);
  CHECK(p.v == fd.apply(p.x));
  CHECK(p.a == fd.apply(p.v));
  for (std::size_t t = 0; t < p.size(); ++t) CHECK(p.g[t] == -p.a[t] - p.ag[t]);
}
