#include "phyulstm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace phyulstm {

void OscillatorParams::validate() const {
  if (!(m > 0.0)) throw std::invalid_argument("OscillatorParams: m must be > 0");
  if (!(c >= 0.0)) throw std::invalid_argument("OscillatorParams: c must be >= 0");
  if (!(k1 > 0.0)) throw std::invalid_argument("OscillatorParams: k1 must be > 0");
  if (!std::isfinite(k2) || !std::isfinite(gamma))
    throw std::invalid_argument("OscillatorParams: k2 and gamma must be finite");
}

double restoring_force(double x, double v, const OscillatorParams& p) {
  return (p.c * v + p.k1 * x + p.k2 * x * x * x) / p.m;
}

StateTrajectory simulate_response(std::span<const double> ag, const OscillatorParams& p, double dt,
                                  InitialState init, std::size_t substeps) {
  p.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_response: dt must be > 0");
  if (substeps < 1) throw std::invalid_argument("simulate_response: substeps must be >= 1");
  for (std::size_t i = 0; i < ag.size(); ++i) {
    if (!std::isfinite(ag[i]))
      throw std::invalid_argument("simulate_response: non-finite ground acceleration at sample " +
                                  std::to_string(i));
  }
  const std::size_t n = ag.size();
  StateTrajectory tr;
  tr.dt = dt;
  tr.t.resize(n);
  tr.x.resize(n);
  tr.v.resize(n);
  tr.a.resize(n);
  tr.g.resize(n);
  tr.ag.assign(ag.begin(), ag.end());
  if (n == 0) return tr;

  auto accel = [&p](double x, double v, double ground) {
    return -restoring_force(x, v, p) - p.gamma * ground;
  };

  double x = init.x, v = init.v;
  for (std::size_t i = 0; i < n; ++i) {
    tr.t[i] = static_cast<double>(i) * dt;
    tr.x[i] = x;
    tr.v[i] = v;
    tr.g[i] = restoring_force(x, v, p);
    tr.a[i] = -tr.g[i] - p.gamma * ag[i];
    if (i + 1 == n) break;

    const double h = dt / static_cast<double>(substeps);
    const double slope = (ag[i + 1] - ag[i]) / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
      const double g0 = ag[i] + slope * static_cast<double>(s);
      const double gm = g0 + 0.5 * slope, g1 = g0 + slope;
      const double k1x = v, k1v = accel(x, v, g0);
      const double k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v, gm);
      const double k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v, gm);
      const double k4x = v + h * k3v, k4v = accel(x + h * k3x, v + h * k3v, g1);
      x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
  }
  return tr;
}

std::size_t sample_count(double duration, double dt) {
  if (!(duration > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("sample_count: duration and dt must be > 0");
  return static_cast<std::size_t>(std::llround(duration / dt)) + 1;
}

std::vector<double> generate_ground_motion(const GroundMotionSpec& spec) {
  const std::size_t n = sample_count(spec.duration, spec.dt);
  if (!(spec.min_center_hz > 0.0) || spec.max_center_hz < spec.min_center_hz)
    throw std::invalid_argument("generate_ground_motion: invalid band-pass centre range");
  if (spec.max_center_hz >= 0.5 / spec.dt)
    throw std::invalid_argument("generate_ground_motion: band-pass centre above Nyquist");
  if (spec.corner_hz < 0.0 || spec.corner_hz >= 0.5 / spec.dt)
    throw std::invalid_argument("generate_ground_motion: low-pass corner must lie in [0, Nyquist)");
  if (spec.rise < 0.0 || spec.hold < 0.0 || spec.rise + spec.hold > 1.0)
    throw std::invalid_argument("generate_ground_motion: envelope fractions must lie in [0, 1]");

  std::vector<double> out(n, 0.0);
  if (spec.intensity == 0.0) return out;

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double f0 = spec.min_center_hz + unit(rng) * (spec.max_center_hz - spec.min_center_hz);

  // Constant 0 dB peak gain band-pass biquad.
  const double w0 = 2.0 * std::numbers::pi * f0 * spec.dt;
  const double alpha = std::sin(w0) / (2.0 * spec.quality);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = noise(rng);
    const double y = b0 * w + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = w;
    y2 = y1;
    y1 = y;
    out[i] = y;
  }

  if (spec.corner_hz > 0.0) {
    // Butterworth low-pass (Q = 1/sqrt(2)).
    const double wc = 2.0 * std::numbers::pi * spec.corner_hz * spec.dt;
    const double al = std::sin(wc) / std::numbers::sqrt2;
    const double c0 = 1.0 + al;
    const double l0 = (1.0 - std::cos(wc)) / 2.0 / c0, l1 = (1.0 - std::cos(wc)) / c0;
    const double d1 = -2.0 * std::cos(wc) / c0, d2 = (1.0 - al) / c0;
    x1 = x2 = y1 = y2 = 0.0;
    for (double& v : out) {
      const double y = l0 * v + l1 * x1 + l0 * x2 - d1 * y1 - d2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }

  const double total = static_cast<double>(n - 1) * spec.dt;
  const double t_rise = spec.rise * total, t_hold_end = (spec.rise + spec.hold) * total;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * spec.dt;
    double env = 1.0;
    if (t < t_rise) {
      env = t / t_rise;
    } else if (t > t_hold_end) {
      env = total > t_hold_end ? (total - t) / (total - t_hold_end) : 0.0;
    }
    out[i] *= std::max(env, 0.0);
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out) v *= spec.intensity / peak;
  return out;
}

}  // namespace phyulstm
