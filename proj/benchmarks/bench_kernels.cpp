#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "phyulstm/datasets.hpp"
#include "phyulstm/differentiator.hpp"
#include "phyulstm/dynamics.hpp"
#include "phyulstm/lstm.hpp"
#include "phyulstm/ops.hpp"
#include "phyulstm/training.hpp"

using namespace phyulstm;

namespace {

Grid3 noise(Shape s, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Grid3 g(s);
  for (double& v : g.data()) v = u(rng);
  return g;
}

}  // namespace

// Args: batch, steps, cin, cout.
static void BM_ConvCausal(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0)), t = static_cast<std::size_t>(state.range(1));
  const auto ci = static_cast<std::size_t>(state.range(2)), co = static_cast<std::size_t>(state.range(3));
  const Grid3 x = noise({b, t, ci}, 1);
  Parameter w("w", {2, ci, co}), bias("b", {1, 1, co});
  w.value = noise({2, ci, co}, 2);
  for (auto _ : state) {
    Tape tape;
    Var y = conv1d_causal(tape.variable(x), tape.parameter(w), tape.parameter(bias));
    tape.backward(mean_square(y));
    benchmark::DoNotOptimize(w.grad.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * t));
}
BENCHMARK(BM_ConvCausal)->Args({10, 400, 1, 50})->Args({10, 400, 50, 100})->Args({10, 100, 100, 200});

// Args: batch, steps, hidden.
static void BM_LstmLayer(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0)), t = static_cast<std::size_t>(state.range(1));
  const auto h = static_cast<std::size_t>(state.range(2));
  LstmCellParams p("lstm", 3, h);
  Rng rng(3);
  p.initialize(rng);
  const Grid3 x = noise({b, t, 3}, 4);
  for (auto _ : state) {
    Tape tape;
    LstmSequence out = lstm_layer_forward(tape.variable(x), p);
    tape.backward(mean_square(out.hidden));
    benchmark::DoNotOptimize(p.w_x[0].grad.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(b * t));
}
BENCHMARK(BM_LstmLayer)->Args({10, 400, 100})->Args({1, 1000, 100})->Args({10, 400, 20});

static void BM_Differentiate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const FdMatrix fd(n, 0.05);
  const Grid3 g = noise({1, n, 1}, 5);
  const std::vector<double> u(g.data().begin(), g.data().end());
  for (auto _ : state) benchmark::DoNotOptimize(fd.apply(u));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Differentiate)->Arg(401)->Arg(1001);

static void BM_Simulate(benchmark::State& state) {
  GroundMotionSpec m;
  m.duration = 50.0;
  const std::vector<double> ag = generate_ground_motion(m);
  const OscillatorParams p;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_response(ag, p, m.dt));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(ag.size()));
}
BENCHMARK(BM_Simulate);

// One full-batch forward + backward of the default model, 10 records of 401 steps.
static void BM_TrainStep(benchmark::State& state) {
  SyntheticDatasetSpec ds;
  ds.n_records = 11;
  ds.duration = 20.0;
  RecordCollection data = generate_synthetic_dataset(ds);
  split(data, 10, 0);
  const auto records = data.take(Split::train);
  const Normalizer norm = fit_normalizer(records, true);
  TrainConfig config;
  config.regime = static_cast<Regime>(state.range(0));
  Surrogate model{ModelSpec{}};
  model.initialize(1);
  for (auto _ : state) {
    Tape tape;
    LossTerms loss = regime_loss(tape, model, norm, records, config, Mode::train);
    tape.backward(loss.total);
    benchmark::DoNotOptimize(loss.breakdown.total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
