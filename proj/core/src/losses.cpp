#include "phyulstm/losses.hpp"

#include <stdexcept>

#include "phyulstm/ops.hpp"

namespace phyulstm {

namespace {

constexpr const char* kDataNames[3] = {"data_x", "data_v", "data_g"};

void require_length(const char* op, const Shape& s, const FdMatrix& fd) {
  if (s.time != fd.n()) {
    throw std::invalid_argument(std::string(op) + ": sequence length " + std::to_string(s.time) +
                                " does not match differentiator size " + std::to_string(fd.n()));
  }
}

void require_series(const char* op, const char* what, const Grid3& g, std::size_t B, std::size_t T) {
  if (g.empty()) throw std::invalid_argument(std::string(op) + ": missing " + what);
  if (g.shape() != Shape{B, T, 1}) {
    throw std::invalid_argument(std::string(op) + ": " + what + " shape " + g.shape().to_string() +
                                " expected " + Shape{B, T, 1}.to_string());
  }
}

/// D v + g + gamma * ag.
Var equation_residual(Var v, Var g, const FdMatrix& fd, const Grid3& ag, double gamma) {
  Grid3 forcing(ag.shape());
  for (std::size_t i = 0; i < ag.size(); ++i) forcing[i] = gamma * ag[i];
  return add_constant(add(differentiate(v, fd), g), forcing);
}

LossTerms finish(std::vector<std::pair<LossBreakdown::Component, Var>> parts) {
  std::vector<std::pair<double, Var>> terms;
  LossTerms out;
  for (auto& [c, v] : parts) {
    c.value = v.value()[0];
    terms.emplace_back(c.weight, v);
    out.breakdown.components.push_back(c);
  }
  out.total = weighted_sum(terms);
  out.breakdown.total = out.total.value()[0];
  return out;
}

}  // namespace

std::optional<double> LossBreakdown::get(const std::string& name) const {
  for (const auto& c : components)
    if (c.name == name) return c.value;
  return std::nullopt;
}

double LossBreakdown::weighted_sum() const {
  double s = 0.0;
  for (const auto& c : components) s += c.weight * c.value;
  return s;
}

LossTerms data_loss(Var pred, const Grid3& measured, ChannelMask available) {
  if (!available.any()) throw std::invalid_argument("data_loss: no measured channels available");
  if (pred.shape().channels != 3 || measured.shape() != pred.shape()) {
    throw std::invalid_argument("data_loss: prediction shape " + pred.shape().to_string() +
                                " and measurement shape " + measured.shape().to_string() +
                                " must agree with 3 channels");
  }
  Tape& tape = pred.tape();
  const bool mask[3] = {available.x, available.v, available.g};
  std::vector<std::pair<LossBreakdown::Component, Var>> parts;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!mask[c]) continue;
    Grid3 target({measured.batch(), measured.time(), 1});
    for (std::size_t n = 0; n < target.size(); ++n) target[n] = measured[n * 3 + c];
    Var diff = sub(select_channel(pred, c), tape.constant(std::move(target)));
    parts.push_back({{kDataNames[c], 0.0, 1.0}, mean_square(diff)});
  }
  return finish(std::move(parts));
}

LossTerms physics_loss(Var pred, const FdMatrix& fd, const Grid3& ag, double gamma) {
  const Shape s = pred.shape();
  require_length("physics_loss", s, fd);
  if (s.channels != 3) throw std::invalid_argument("physics_loss: prediction must have 3 channels");
  require_series("physics_loss", "ground acceleration", ag, s.batch, s.time);
  Var x = select_channel(pred, 0), v = select_channel(pred, 1), g = select_channel(pred, 2);
  Var consistency = mean_square(sub(v, differentiate(x, fd)));
  Var residual = mean_square(equation_residual(v, g, fd, ag, gamma));
  return finish({{{"consistency", 0.0, 1.0}, consistency}, {{"physics_residual", 0.0, 1.0}, residual}});
}

LossTerms combined_loss(Var pred_normalized, const Grid3& measured_normalized, ChannelMask available,
                        Var pred_physical, const FdMatrix& fd, const Grid3& ag, double gamma,
                        double w1, double w2) {
  LossTerms data = data_loss(pred_normalized, measured_normalized, available);
  LossTerms physics = physics_loss(pred_physical, fd, ag, gamma);
  std::vector<std::pair<LossBreakdown::Component, Var>> parts;
  // Components are re-weighted individually so the breakdown stays flat.
  auto collect = [&parts](const LossTerms& t, double w) {
    for (const auto& c : t.breakdown.components) parts.push_back({{c.name, c.value, w}, Var()});
  };
  collect(data, w1);
  collect(physics, w2);
  LossTerms out;
  out.breakdown.components.reserve(parts.size());
  for (const auto& [c, _] : parts) out.breakdown.components.push_back(c);
  out.total = weighted_sum({{w1, data.total}, {w2, physics.total}});
  out.breakdown.total = out.total.value()[0];
  return out;
}

LossTerms accel_only_loss(Var pred_physical, const Grid3& measured_a, const FdMatrix& fd,
                          const Grid3& ag, double gamma) {
  const Shape s = pred_physical.shape();
  require_length("accel_only_loss", s, fd);
  if (s.channels != 3) throw std::invalid_argument("accel_only_loss: prediction must have 3 channels");
  require_series("accel_only_loss", "measured acceleration", measured_a, s.batch, s.time);
  require_series("accel_only_loss", "ground acceleration", ag, s.batch, s.time);
  Tape& tape = pred_physical.tape();
  Var x = select_channel(pred_physical, 0), v = select_channel(pred_physical, 1),
      g = select_channel(pred_physical, 2);
  Var dv = differentiate(v, fd);
  Var consistency = mean_square(sub(v, differentiate(x, fd)));
  Var accel = mean_square(sub(dv, tape.constant(measured_a)));
  Grid3 forcing(ag.shape());
  for (std::size_t i = 0; i < ag.size(); ++i) forcing[i] = gamma * ag[i];
  Var residual = mean_square(add_constant(add(dv, g), forcing));
  return finish({{{"consistency", 0.0, 1.0}, consistency},
                 {{"accel_match", 0.0, 1.0}, accel},
                 {{"physics_residual", 0.0, 1.0}, residual}});
}

LossTerms datadriven_loss(Var pred_x, const Grid3& measured_a, const FdMatrix& fd) {
  const Shape s = pred_x.shape();
  require_length("datadriven_loss", s, fd);
  if (s.channels != 1) throw std::invalid_argument("datadriven_loss: expected a single displacement channel");
  require_series("datadriven_loss", "measured acceleration", measured_a, s.batch, s.time);
  Var accel = mean_square(sub(pred_x.tape().constant(measured_a), second_derivative(pred_x, fd)));
  return finish({{{"accel_match", 0.0, 1.0}, accel}});
}

}  // namespace phyulstm
