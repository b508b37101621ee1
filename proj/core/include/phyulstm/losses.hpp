#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phyulstm/autodiff.hpp"
#include "phyulstm/differentiator.hpp"

namespace phyulstm {

/// Named loss components with the weight each contributes to the total.
/// Component names: data_x, data_v, data_g, consistency, physics_residual,
/// accel_match.
struct LossBreakdown {
  struct Component {
    std::string name;
    double value = 0.0;
    double weight = 1.0;
  };

  double total = 0.0;
  std::vector<Component> components;

  std::optional<double> get(const std::string& name) const;
  bool has(const std::string& name) const { return get(name).has_value(); }
  /// sum(weight * value) over the components.
  double weighted_sum() const;
};

/// A taped scalar loss and its breakdown.
struct LossTerms {
  Var total;
  LossBreakdown breakdown;
};

/// Which of the state channels (x, v, g) carry measurements.
struct ChannelMask {
  bool x = true;
  bool v = true;
  bool g = true;

  bool any() const { return x || v || g; }
};

/// Mean-square mismatch per available channel. pred and measured are
/// (B, T, 3) with channels x, v, g.
LossTerms data_loss(Var pred, const Grid3& measured, ChannelMask available = {});

/// consistency:      mean (v - D x)^2
/// physics_residual: mean (D v + g + gamma * ag)^2
/// pred is (B, T, 3) in physical units, ag is (B, T, 1).
LossTerms physics_loss(Var pred, const FdMatrix& fd, const Grid3& ag, double gamma);

/// w1 * data + w2 * physics. Data terms compare normalized channels; the
/// physics terms use the physical-unit prediction.
LossTerms combined_loss(Var pred_normalized, const Grid3& measured_normalized, ChannelMask available,
                        Var pred_physical, const FdMatrix& fd, const Grid3& ag, double gamma,
                        double w1 = 1.0, double w2 = 1.0);

/// Acceleration-only regime: consistency + mean (D v - a_m)^2 + physics_residual.
LossTerms accel_only_loss(Var pred_physical, const Grid3& measured_a, const FdMatrix& fd,
                          const Grid3& ag, double gamma);

/// System-agnostic regime: mean (a_m - D D x)^2. pred_x is (B, T, 1).
LossTerms datadriven_loss(Var pred_x, const Grid3& measured_a, const FdMatrix& fd);

}  // namespace phyulstm
