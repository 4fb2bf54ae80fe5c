#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "amploco/errors.hpp"

namespace amploco {

// Periodic gait clock. The swing window occupies [0, swing_ratio) of each
// leg-local cycle and stance occupies the remainder.
struct GaitClock {
  double phase = 0.0;         // cycle fraction in [0, 1)
  double period = 0.8;        // s
  double swing_ratio = 0.4;   // rho in (0, 1)
  double offset_left = 0.0;   // cycle fraction
  double offset_right = 0.5;  // cycle fraction
  double kappa = 50.0;        // Von Mises concentration
};

struct PhaseExpectation {
  double swing = 0.0;
  double stance = 0.0;
};

inline double wrap_unit(double x) {
  double w = x - std::floor(x);
  return w >= 1.0 ? 0.0 : w;
}

inline void validate_clock(const GaitClock& c) {
  if (!(c.period > 0.0)) throw DomainError("gait period must be positive");
  if (!(c.swing_ratio > 0.0 && c.swing_ratio < 1.0)) throw DomainError("swing ratio must lie in (0, 1)");
  if (!(c.kappa > 0.0) || !std::isfinite(c.kappa)) throw DomainError("Von Mises concentration must be positive");
  if (!(c.phase >= 0.0 && c.phase < 1.0)) throw DomainError("phase must lie in [0, 1)");
  if (!(c.offset_left >= 0.0 && c.offset_left < 1.0) || !(c.offset_right >= 0.0 && c.offset_right < 1.0))
    throw DomainError("leg offsets must lie in [0, 1)");
}

inline GaitClock advance(GaitClock c, double dt) {
  if (!(dt > 0.0)) throw DomainError("clock advance requires dt > 0");
  c.phase = wrap_unit(c.phase + dt / c.period);
  return c;
}

namespace detail {

// Coefficients I_n(kappa) / (n I_0(kappa)) of the Von Mises cumulative series,
// obtained from the Bessel ratio continued fraction by backward recurrence.
// Truncated once the next coefficient drops below 1e-19.
inline std::vector<double> von_mises_series(double kappa) {
  const int top = static_cast<int>(std::ceil(std::sqrt(90.0 * kappa))) + 40;
  std::vector<double> ratio(top + 2, 0.0);  // ratio[n] = I_n / I_{n-1}
  for (int n = top; n >= 1; --n) ratio[n] = 1.0 / (2.0 * n / kappa + ratio[n + 1]);
  std::vector<double> coeff;
  double r = 1.0;
  for (int n = 1; n <= top; ++n) {
    r *= ratio[n];
    const double c = r / n;
    if (c < 1e-19) break;
    coeff.push_back(c);
  }
  return coeff;
}

struct VonMisesSeriesCache {
  double kappa = -1.0;
  std::vector<double> coeff;

  const std::vector<double>& get(double k) {
    if (k != kappa) {
      coeff = von_mises_series(k);
      kappa = k;
    }
    return coeff;
  }
};

// Primitive of the centered Von Mises density on the real line:
// Phi(x) = x / 2pi + (1/pi) sum_n I_n/(n I_0) sin(n x). Phi(x + 2pi) = Phi(x) + 1.
inline double von_mises_primitive(double x, const std::vector<double>& coeff) {
  // sin(n x) by the Chebyshev recurrence s_{n+1} = 2 cos(x) s_n - s_{n-1}
  const double c2 = 2.0 * std::cos(x);
  double s_prev = 0.0;
  double s = std::sin(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < coeff.size(); ++i) {
    sum += coeff[i] * s;
    const double next = c2 * s - s_prev;
    s_prev = s;
    s = next;
  }
  return x / (2.0 * std::numbers::pi) + sum / std::numbers::pi;
}

}  // namespace detail

// Probability that a Von Mises phase centered at `phase` (cycle fraction,
// concentration `kappa` on the 2pi circle) falls in the swing arc [0, ratio).
inline PhaseExpectation phase_expectation(double phase, double ratio, double kappa) {
  if (!(phase >= 0.0 && phase < 1.0)) throw DomainError("phase must lie in [0, 1)");
  if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("swing ratio must lie in (0, 1)");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("Von Mises concentration must be positive");
  thread_local detail::VonMisesSeriesCache cache;
  const auto& coeff = cache.get(kappa);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  // Reduce arguments to [-pi, pi] so the truncated sine sum stays accurate;
  // each full turn contributes exactly 1 to the primitive.
  auto primitive = [&](double x) {
    const double turns = std::round(x / two_pi);
    return detail::von_mises_primitive(x - two_pi * turns, coeff) + turns;
  };
  double swing = primitive(two_pi * (ratio - phase)) - primitive(-two_pi * phase);
  swing = std::clamp(swing, 0.0, 1.0);
  return {swing, 1.0 - swing};
}

// (Q_left, Q_right): stance expectation of each leg at its offset phase.
inline std::pair<double, double> leg_stance_expectations(const GaitClock& c) {
  return {phase_expectation(wrap_unit(c.phase + c.offset_left), c.swing_ratio, c.kappa).stance,
          phase_expectation(wrap_unit(c.phase + c.offset_right), c.swing_ratio, c.kappa).stance};
}

// Leg-local phase divided by the swing ratio; 1 marks the end of swing.
inline double swing_progress(double phase, double offset, double ratio) {
  return wrap_unit(phase + offset) / ratio;
}

inline std::pair<double, double> leg_swing_progress(const GaitClock& c) {
  return {swing_progress(c.phase, c.offset_left, c.swing_ratio),
          swing_progress(c.phase, c.offset_right, c.swing_ratio)};
}

}  // namespace amploco
