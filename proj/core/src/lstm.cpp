#include "phyulstm/lstm.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "eigen_maps.hpp"

namespace phyulstm {

namespace {

constexpr std::array<const char*, 4> kGateNames{"f", "i", "c", "o"};

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct BoundCell {
  std::array<Var, 4> w_x, w_h, b;
};

BoundCell bind(Tape& tape, LstmCellParams& p) {
  BoundCell out;
  for (std::size_t g = 0; g < 4; ++g) {
    out.w_x[g] = tape.parameter(p.w_x[g]);
    out.w_h[g] = tape.parameter(p.w_h[g]);
    out.b[g] = tape.parameter(p.b[g]);
  }
  return out;
}

/// Saved forward quantities of one unrolled layer.
struct LstmCache {
  std::size_t B = 0, T = 0, Cin = 0, H = 0;
  detail::RowMatrix wx, wh;  // packed (Cin, 4H), (H, 4H)
  AlignedBuffer gates;   // activated gates [b][t][4H]
  AlignedBuffer cells;   // c_t [b][t][H]
  AlignedBuffer h_prev;  // h_{t-1} [b][t][H]
  AlignedBuffer c_prev0; // c_0 [b][H]
};

}  // namespace

void init_uniform(Parameter& p, double limit, Rng& rng) {
  for (double& v : p.value.data()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

DenseParams::DenseParams(const std::string& prefix, std::size_t in, std::size_t out, Activation a)
    : weight(prefix + ".weight", {1, in, out}), bias(prefix + ".bias", {1, 1, out}), act(a) {}

void DenseParams::initialize(Rng& rng) {
  init_uniform(weight, 1.0 / std::sqrt(static_cast<double>(inputs())), rng);
  bias.value.fill(0.0);
}

std::vector<Parameter*> DenseParams::parameters() { return {&weight, &bias}; }

Var dense_forward(Var input, DenseParams& p) {
  Tape& tape = input.tape();
  Var y = dense_timewise(input, tape.parameter(p.weight), tape.parameter(p.bias));
  return p.act == Activation::linear ? y : activation(y, p.act);
}

LstmCellParams::LstmCellParams(const std::string& prefix, std::size_t in, std::size_t hidden_units)
    : input(in), hidden(hidden_units) {
  for (std::size_t g = 0; g < 4; ++g) {
    w_x[g] = Parameter(prefix + ".w_x" + kGateNames[g], {1, in, hidden_units});
    w_h[g] = Parameter(prefix + ".w_h" + kGateNames[g], {1, hidden_units, hidden_units});
    b[g] = Parameter(prefix + ".b_" + kGateNames[g], {1, 1, hidden_units});
  }
}

void LstmCellParams::initialize(Rng& rng) {
  const double lx = 1.0 / std::sqrt(static_cast<double>(input));
  const double lh = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t g = 0; g < 4; ++g) {
    init_uniform(w_x[g], lx, rng);
    init_uniform(w_h[g], lh, rng);
    b[g].value.fill(g == kForget ? 1.0 : 0.0);
  }
}

std::vector<Parameter*> LstmCellParams::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t g = 0; g < 4; ++g) out.push_back(&w_x[g]);
  for (std::size_t g = 0; g < 4; ++g) out.push_back(&w_h[g]);
  for (std::size_t g = 0; g < 4; ++g) out.push_back(&b[g]);
  return out;
}

LstmSequence lstm_layer_forward(Var seq, LstmCellParams& params, LstmState init) {
  Tape& tape = seq.tape();
  const Shape in = seq.shape();
  const std::size_t B = in.batch, T = in.time, Cin = in.channels, H = params.hidden;
  if (T < 1) throw std::invalid_argument("lstm_layer_forward: empty sequence");
  if (Cin != params.input) {
    throw std::invalid_argument("lstm_layer_forward: input shape " + in.to_string() +
                                " does not match cell input width " +
                                std::to_string(params.input));
  }
  for (std::size_t g = 0; g < 4; ++g) {
    if (params.w_x[g].value.shape() != Shape{1, Cin, H} ||
        params.w_h[g].value.shape() != Shape{1, H, H} || params.b[g].value.shape() != Shape{1, 1, H})
      throw std::invalid_argument("lstm_layer_forward: inconsistent parameter shapes for gate " +
                                  std::string(kGateNames[g]));
  }
  if (!init.h.valid()) init.h = tape.constant(Grid3({B, 1, H}));
  if (!init.c.valid()) init.c = tape.constant(Grid3({B, 1, H}));
  if (init.h.shape() != Shape{B, 1, H} || init.c.shape() != Shape{B, 1, H}) {
    throw std::invalid_argument("lstm_layer_forward: initial state shapes " +
                                init.h.shape().to_string() + "/" + init.c.shape().to_string() +
                                " expected " + Shape{B, 1, H}.to_string());
  }

  const BoundCell cell = bind(tape, params);
  auto cache = std::make_shared<LstmCache>();
  cache->B = B;
  cache->T = T;
  cache->Cin = Cin;
  cache->H = H;
  cache->wx.resize(static_cast<Eigen::Index>(Cin), static_cast<Eigen::Index>(4 * H));
  cache->wh.resize(static_cast<Eigen::Index>(H), static_cast<Eigen::Index>(4 * H));
  detail::RowVector bias(static_cast<Eigen::Index>(4 * H));
  for (std::size_t g = 0; g < 4; ++g) {
    const auto gi = static_cast<Eigen::Index>(g * H);
    const auto h = static_cast<Eigen::Index>(H);
    cache->wx.middleCols(gi, h) = detail::matrix(params.w_x[g].value.ptr(), Cin, H);
    cache->wh.middleCols(gi, h) = detail::matrix(params.w_h[g].value.ptr(), H, H);
    bias.segment(gi, h) = detail::row_vector(params.b[g].value.ptr(), H);
  }

  const std::size_t G = 4 * H;
  cache->gates.assign(B * T * G, 0.0);
  cache->cells.assign(B * T * H, 0.0);
  cache->h_prev.assign(B * T * H, 0.0);
  cache->c_prev0.assign(init.c.value().data().begin(), init.c.value().data().end());

  // Input projections of all steps in one product.
  auto pre = detail::matrix(cache->gates.data(), B * T, G);
  pre.noalias() = detail::matrix(seq.value().ptr(), B * T, Cin) * cache->wx;
  pre.rowwise() += bias;

  Grid3 hidden({B, T, H});
  Grid3 last_cell({B, 1, H});
  detail::RowMatrix h_state = detail::matrix(init.h.value().ptr(), B, H);
  detail::RowMatrix c_state = detail::matrix(init.c.value().ptr(), B, H);
  detail::RowMatrix z(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(G));
  for (std::size_t t = 0; t < T; ++t) {
    detail::strided(cache->h_prev.data() + t * H, B, H, T * H) = h_state;
    auto zt = detail::strided(cache->gates.data() + t * G, B, G, T * G);
    z.noalias() = h_state * cache->wh;
    z += zt;
    for (std::size_t b = 0; b < B; ++b) {
      const auto bi = static_cast<Eigen::Index>(b);
      for (std::size_t j = 0; j < H; ++j) {
        const auto ji = static_cast<Eigen::Index>(j);
        const double f = logistic(z(bi, ji));
        const double i = logistic(z(bi, ji + static_cast<Eigen::Index>(H)));
        const double g = std::tanh(z(bi, ji + static_cast<Eigen::Index>(2 * H)));
        const double o = logistic(z(bi, ji + static_cast<Eigen::Index>(3 * H)));
        const double c = f * c_state(bi, ji) + i * g;
        const double h = o * std::tanh(c);
        z(bi, ji) = f;
        z(bi, ji + static_cast<Eigen::Index>(H)) = i;
        z(bi, ji + static_cast<Eigen::Index>(2 * H)) = g;
        z(bi, ji + static_cast<Eigen::Index>(3 * H)) = o;
        c_state(bi, ji) = c;
        h_state(bi, ji) = h;
        cache->cells[(b * T + t) * H + j] = c;
        hidden.at(b, t, j) = h;
      }
    }
    zt = z;
  }
  std::copy(c_state.data(), c_state.data() + B * H, last_cell.ptr());

  std::vector<Var> inputs{seq, init.h, init.c};
  for (std::size_t g = 0; g < 4; ++g) {
    inputs.push_back(cell.w_x[g]);
    inputs.push_back(cell.w_h[g]);
    inputs.push_back(cell.b[g]);
  }

  Var hidden_var = tape.record(
      std::move(hidden), inputs,
      [cache, seq, init, cell](Tape& tape, std::size_t self) {
        const LstmCache& k = *cache;
        const std::size_t B = k.B, T = k.T, Cin = k.Cin, H = k.H, G = 4 * H;
        const Grid3& gh = tape.grad_of(self);
        // The final cell state is recorded immediately after this node.
        const std::size_t cell_id = self + 1;

        AlignedBuffer dz_all(B * T * G, 0.0);
        detail::RowMatrix dh_next = detail::RowMatrix::Zero(static_cast<Eigen::Index>(B),
                                                            static_cast<Eigen::Index>(H));
        detail::RowMatrix dc_next = dh_next;
        if (cell_id < tape.size() && tape.has_grad(cell_id))
          dc_next = detail::matrix(tape.grad_of(cell_id).ptr(), B, H);

        for (std::size_t t = T; t-- > 0;) {
          for (std::size_t b = 0; b < B; ++b) {
            const auto bi = static_cast<Eigen::Index>(b);
            const double* gate = k.gates.data() + (b * T + t) * G;
            double* dz = dz_all.data() + (b * T + t) * G;
            for (std::size_t j = 0; j < H; ++j) {
              const auto ji = static_cast<Eigen::Index>(j);
              const double f = gate[j], i = gate[H + j], g = gate[2 * H + j], o = gate[3 * H + j];
              const double c = k.cells[(b * T + t) * H + j];
              const double c_prev = t > 0 ? k.cells[(b * T + t - 1) * H + j] : k.c_prev0[b * H + j];
              const double tc = std::tanh(c);
              const double dh = gh.at(b, t, j) + dh_next(bi, ji);
              const double dc = dc_next(bi, ji) + dh * o * (1.0 - tc * tc);
              dz[j] = dc * c_prev * f * (1.0 - f);
              dz[H + j] = dc * g * i * (1.0 - i);
              dz[2 * H + j] = dc * i * (1.0 - g * g);
              dz[3 * H + j] = dh * tc * o * (1.0 - o);
              dc_next(bi, ji) = dc * f;
            }
          }
          dh_next.noalias() =
              detail::strided(dz_all.data() + t * G, B, G, T * G) * k.wh.transpose();
        }

        if (init.h.requires_grad()) detail::matrix(tape.grad_of(init.h.id()).ptr(), B, H) += dh_next;
        if (init.c.requires_grad()) detail::matrix(tape.grad_of(init.c.id()).ptr(), B, H) += dc_next;

        auto dz = detail::matrix(dz_all.data(), B * T, G);
        if (seq.requires_grad())
          detail::matrix(tape.grad_of(seq.id()).ptr(), B * T, Cin).noalias() += dz * k.wx.transpose();

        const detail::RowMatrix dwx = detail::matrix(seq.value().ptr(), B * T, Cin).transpose() * dz;
        const detail::RowMatrix dwh = detail::matrix(k.h_prev.data(), B * T, H).transpose() * dz;
        const detail::RowVector db = dz.colwise().sum();
        for (std::size_t g = 0; g < 4; ++g) {
          const auto gi = static_cast<Eigen::Index>(g * H);
          const auto h = static_cast<Eigen::Index>(H);
          if (cell.w_x[g].requires_grad())
            detail::matrix(tape.grad_of(cell.w_x[g].id()).ptr(), Cin, H) += dwx.middleCols(gi, h);
          if (cell.w_h[g].requires_grad())
            detail::matrix(tape.grad_of(cell.w_h[g].id()).ptr(), H, H) += dwh.middleCols(gi, h);
          if (cell.b[g].requires_grad())
            detail::row_vector(tape.grad_of(cell.b[g].id()).ptr(), H) += db.segment(gi, h);
        }
      });

  // Gradient reaching the final cell state is consumed by the node above;
  // this node only makes sure that node runs even if its own output is unused.
  Var cell_var = tape.record(std::move(last_cell), {hidden_var}, [hidden_var](Tape& tape, std::size_t) {
    tape.grad_of(hidden_var.id());
  });
  return {hidden_var, cell_var};
}

LstmState lstm_cell_step(Var x_t, LstmState prev, LstmCellParams& params) {
  if (x_t.shape().time != 1) {
    throw std::invalid_argument("lstm_cell_step: expected a single time step, got shape " +
                                x_t.shape().to_string());
  }
  LstmSequence s = lstm_layer_forward(x_t, params, prev);
  return {s.hidden, s.last_cell};
}

void DeepLstmParams::initialize(Rng& rng) {
  for (auto& l : layers) l.initialize(rng);
  for (auto& d : dense) d.initialize(rng);
  head.initialize(rng);
}

std::vector<Parameter*> DeepLstmParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers)
    for (Parameter* p : l.parameters()) out.push_back(p);
  for (auto& d : dense)
    for (Parameter* p : d.parameters()) out.push_back(p);
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

DeepLstmParams make_deep_lstm(const DeepLstmSpec& spec) {
  if (spec.lstm_units.empty()) throw std::invalid_argument("make_deep_lstm: need at least one LSTM layer");
  DeepLstmParams stack;
  std::size_t width = spec.input;
  for (std::size_t l = 0; l < spec.lstm_units.size(); ++l) {
    stack.layers.emplace_back("lstm" + std::to_string(l), width, spec.lstm_units[l]);
    width = spec.lstm_units[l];
  }
  for (std::size_t d = 0; d < spec.dense_units.size(); ++d) {
    stack.dense.emplace_back("dense" + std::to_string(d), width, spec.dense_units[d], Activation::relu);
    width = spec.dense_units[d];
  }
  stack.head = DenseParams("head", width, spec.outputs, Activation::linear);
  return stack;
}

Var deep_lstm_forward(Var seq, DeepLstmParams& stack) {
  std::size_t width = seq.shape().channels;
  Var h = seq;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    if (stack.layers[l].input != width) {
      throw std::invalid_argument("deep_lstm_forward: layer " + std::to_string(l) + " expects width " +
                                  std::to_string(stack.layers[l].input) + ", got " +
                                  std::to_string(width));
    }
    h = lstm_layer_forward(h, stack.layers[l]).hidden;
    width = stack.layers[l].hidden;
  }
  for (std::size_t d = 0; d < stack.dense.size(); ++d) {
    if (stack.dense[d].inputs() != width) {
      throw std::invalid_argument("deep_lstm_forward: dense layer " + std::to_string(d) +
                                  " expects width " + std::to_string(stack.dense[d].inputs()) +
                                  ", got " + std::to_string(width));
    }
    h = dense_forward(h, stack.dense[d]);
    width = stack.dense[d].outputs();
  }
  if (stack.head.inputs() != width) {
    throw std::invalid_argument("deep_lstm_forward: head expects width " +
                                std::to_string(stack.head.inputs()) + ", got " + std::to_string(width));
  }
  return dense_forward(h, stack.head);
}

}  // namespace phyulstm
