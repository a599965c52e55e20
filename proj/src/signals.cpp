#include "lyap/signals.hpp"

#include <cmath>
#include <numbers>

#include "lyap/error.hpp"

namespace lyap {

Vector gen_four_sine(std::size_t steps, const FourSineParams& params) {
  require(steps >= 1, "four-sine needs at least one step");
  require(params.f0 > 0.0 && params.sample_spacing > 0.0, "four-sine frequency and spacing > 0");
  double power = 0.0;
  for (int k = 1; k <= 4; ++k) power += 0.5 * (params.amplitude / k) * (params.amplitude / k);
  const double inv_rms = 1.0 / std::sqrt(power);
  Vector out(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * params.sample_spacing;
    double v = 0.0;
    for (int k = 1; k <= 4; ++k)
      v += (params.amplitude / k) * std::sin(2.0 * std::numbers::pi * k * params.f0 * t);
    out[i] = v * inv_rms;
  }
  return out;
}

}  // namespace lyap
