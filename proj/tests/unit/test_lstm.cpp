#include <cmath>

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "gradcheck.hpp"
#include "phyulstm/lstm.hpp"

using namespace phyulstm;
using phyulstm::testing::gradcheck;
using phyulstm::testing::random_grid;
using phyulstm::testing::randomize;
using phyulstm::testing::sum_squares;

namespace {

LstmCellParams zero_cell(std::size_t in, std::size_t h) { return LstmCellParams("cell", in, h); }

void randomize_cell(LstmCellParams& p, std::uint64_t seed) {
  for (Parameter* q : p.parameters()) randomize(*q, seed++, -0.5, 0.5);
}

}  // namespace

TEST_CASE("lstm cell with zero parameters") {
  LstmCellParams p = zero_cell(2, 3);
  Tape tape;
  SUBCASE("from rest stays at rest") {
    LstmState s = lstm_cell_step(tape.constant(Grid3({1, 1, 2}, 1.0)), {}, p);
    for (double v : s.c.value().data()) CHECK(v == 0.0);
    for (double v : s.h.value().data()) CHECK(v == 0.0);
  }
  SUBCASE("half of the previous cell is kept") {
    LstmState prev{tape.constant(Grid3({1, 1, 3})), tape.constant(Grid3({1, 1, 3}, 2.0))};
    LstmState s = lstm_cell_step(tape.constant(Grid3({1, 1, 2})), prev, p);
    for (double v : s.c.value().data()) CHECK(v == doctest::Approx(1.0));
    for (double v : s.h.value().data()) CHECK(v == doctest::Approx(0.5 * std::tanh(1.0)));
    CHECK(s.h.value()[0] == doctest::Approx(0.3808).epsilon(1e-4));
  }
}

TEST_CASE("lstm initialization") {
  LstmCellParams p("lstm0", 3, 4);
  Rng rng(5);
  p.initialize(rng);
  CHECK(p.parameters().size() == 12);
  CHECK(p.b[kForget].name == "lstm0.b_f");
  for (double v : p.b[kForget].value.data()) CHECK(v == 1.0);
  for (double v : p.b[kInput].value.data()) CHECK(v == 0.0);
  const double lim = 1.0 / std::sqrt(3.0);
  for (double v : p.w_x[kCandidate].value.data()) CHECK(std::abs(v) <= lim);
}

TEST_CASE("lstm cell oracle on random parameters") {
  // Scalar re-evaluation of the gate equations.
  LstmCellParams p = zero_cell(3, 4);
  randomize_cell(p, 100);
  Grid3 x = random_grid({2, 1, 3}, 7), h0 = random_grid({2, 1, 4}, 8), c0 = random_grid({2, 1, 4}, 9);
  Tape tape;
  LstmState s = lstm_cell_step(tape.constant(x), {tape.constant(h0), tape.constant(c0)}, p);
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 4; ++j) {
      double z[4];
      for (std::size_t g = 0; g < 4; ++g) {
        z[g] = p.b[g].value[j];
        for (std::size_t i = 0; i < 3; ++i) z[g] += x.at(b, 0, i) * p.w_x[g].value.at(0, i, j);
        for (std::size_t i = 0; i < 4; ++i) z[g] += h0.at(b, 0, i) * p.w_h[g].value.at(0, i, j);
      }
      const double c = sig(z[kForget]) * c0.at(b, 0, j) + sig(z[kInput]) * std::tanh(z[kCandidate]);
      const double h = sig(z[kOutput]) * std::tanh(c);
      CHECK(s.c.value().at(b, 0, j) == doctest::Approx(c).epsilon(1e-13));
      CHECK(s.h.value().at(b, 0, j) == doctest::Approx(h).epsilon(1e-13));
    }
}

TEST_CASE("lstm cell gradient w.r.t. every parameter") {
  LstmCellParams p = zero_cell(3, 4);
  randomize_cell(p, 200);
  auto r = gradcheck({random_grid({2, 1, 3}, 1), random_grid({2, 1, 4}, 2), random_grid({2, 1, 4}, 3)},
                     [&](Tape&, const std::vector<Var>& v) {
                       LstmState s = lstm_cell_step(v[0], {v[1], v[2]}, p);
                       return sum_squares(s.h);
                     },
                     p.parameters());
  CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
}

TEST_CASE("lstm layer gradient through time including the final cell") {
  LstmCellParams p = zero_cell(2, 3);
  randomize_cell(p, 300);
  auto r = gradcheck({random_grid({2, 5, 2}, 4)},
                     [&](Tape&, const std::vector<Var>& v) {
                       LstmSequence s = lstm_layer_forward(v[0], p);
                       return add(sum_squares(s.hidden), sum(s.last_cell));
                     },
                     p.parameters());
  CHECK_MESSAGE(r.max_rel_err < 1e-5, r.worst);
}

TEST_CASE("lstm layer with T = 1 equals one cell step") {
  LstmCellParams p = zero_cell(2, 3);
  randomize_cell(p, 400);
  Grid3 x = random_grid({2, 1, 2}, 5);
  Tape tape;
  LstmSequence seq = lstm_layer_forward(tape.constant(x), p);
  LstmState step = lstm_cell_step(tape.constant(x), {}, p);
  CHECK(seq.hidden.value() == step.h.value());
  CHECK(seq.last_cell.value() == step.c.value());
}

TEST_CASE("lstm layer invariants") {
  LstmCellParams p = zero_cell(2, 3);
  Tape tape;
  CHECK(lstm_layer_forward(tape.constant(Grid3({1, 6, 2})), p).hidden.value() == Grid3({1, 6, 3}));

  randomize_cell(p, 500);
  for (Parameter* q : p.parameters())
    for (double& v : q->value.data()) v *= 6.0;
  Grid3 x = random_grid({2, 12, 2}, 6, -5, 5);
  Grid3 h = lstm_layer_forward(tape.constant(x), p).hidden.value();
  for (double v : h.data()) CHECK(std::abs(v) <= 1.0);

  for (std::size_t t = 0; t < 12; ++t) {
    Grid3 y = x;
    y.at(0, t, 1) += 1.0;
    Grid3 hp = lstm_layer_forward(tape.constant(y), p).hidden.value();
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < 3; ++j) CHECK(hp.at(0, s, j) == h.at(0, s, j));
    if (t + 1 < 12) CHECK(hp.at(0, 11, 0) != h.at(0, 11, 0));
  }
}

TEST_CASE("deep lstm stack") {
  DeepLstmParams stack = make_deep_lstm({3, {8, 8}, {8}, 3});
  Rng rng(1);
  stack.initialize(rng);
  Tape tape;
  CHECK(deep_lstm_forward(tape.constant(Grid3({10, 1001, 3})), stack).shape() == Shape{10, 1001, 3});

  SUBCASE("one layer equals layer plus head") {
    DeepLstmParams one = make_deep_lstm({2, {4}, {}, 3});
    one.initialize(rng);
    Grid3 x = random_grid({1, 7, 2}, 8);
    Grid3 a = deep_lstm_forward(tape.constant(x), one).value();
    Grid3 b = dense_forward(lstm_layer_forward(tape.constant(x), one.layers[0]).hidden, one.head).value();
    CHECK(a == b);
  }
  SUBCASE("width chain mismatch is rejected") {
    DeepLstmParams bad = make_deep_lstm({3, {4, 4}, {}, 3});
    bad.layers[1] = LstmCellParams("lstm1", 5, 4);
    CHECK_THROWS_AS(deep_lstm_forward(tape.constant(Grid3({1, 4, 3})), bad), std::invalid_argument);
  }
}

TEST_CASE("deep lstm end-to-end gradient") {
  DeepLstmParams stack = make_deep_lstm({2, {3, 3}, {4}, 3});
  Rng rng(2);
  stack.initialize(rng);
  auto r = gradcheck({random_grid({1, 12, 2}, 9)},
                     [&](Tape&, const std::vector<Var>& v) { return sum_squares(deep_lstm_forward(v[0], stack)); },
                     stack.parameters());
  CHECK_MESSAGE(r.max_rel_err < 1e-4, r.worst);
}
