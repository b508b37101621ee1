#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace phyulstm {

/// Duffing-type SDOF: m x'' + c x' + k1 x + k2 x^3 = -m Gamma ag.
/// Defaults are the benchmark constants (m=1 kg, c=1 N s/m, k1=20 N/m, k2=200).
struct OscillatorParams {
  double m = 1.0;
  double c = 1.0;
  double k1 = 20.0;
  double k2 = 200.0;
  double gamma = 1.0;

  void validate() const;
};

/// Uniformly sampled response history. `a` is the acceleration relative to
/// the ground, `g` the mass-normalized restoring force, `ag` the excitation.
struct StateTrajectory {
  double dt = 0.0;
  std::vector<double> t, x, v, a, g, ag;

  std::size_t size() const { return t.size(); }
};

/// (c v + k1 x + k2 x^3) / m.
double restoring_force(double x, double v, const OscillatorParams& p);

struct InitialState {
  double x = 0.0;
  double v = 0.0;
};

/// Classical RK4 on (x' = v, v' = -g(x, v) - Gamma ag(t)) with `substeps`
/// equal steps per sample interval and ag linearly interpolated between
/// samples. a and g are filled from the equation of motion so that
/// a + g + Gamma ag = 0 at every sample.
inline constexpr std::size_t kDefaultSubsteps = 4;

StateTrajectory simulate_response(std::span<const double> ag, const OscillatorParams& p, double dt,
                                  InitialState init = {}, std::size_t substeps = kDefaultSubsteps);

/// Band-limited stochastic excitation: white noise through a second-order
/// band-pass centred at a seeded frequency in [min_center_hz, max_center_hz],
/// shaped by a trapezoidal envelope (rise, hold, decay fractions of the
/// duration) and scaled so that max |ag| = intensity.
struct GroundMotionSpec {
  double duration = 50.0;
  double dt = 0.05;
  std::uint64_t seed = 0;
  double intensity = 1.0;
  double min_center_hz = 0.5;
  double max_center_hz = 1.5;
  double quality = 1.0;
  /// Corner of a second-order Butterworth low-pass applied after the
  /// band-pass; 0 disables it.
  double corner_hz = 1.0;
  double rise = 0.1;
  double hold = 0.4;
};

/// round(duration / dt) + 1 samples starting at t = 0.
std::size_t sample_count(double duration, double dt);

std::vector<double> generate_ground_motion(const GroundMotionSpec& spec);

}  // namespace phyulstm
