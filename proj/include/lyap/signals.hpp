#pragma once

#include <cstddef>

#include "lyap/matrix.hpp"

namespace lyap {

// f(t) = sum_{k=1..4} (A/k) sin(2 pi k f0 t), t = i * sample_spacing,
// divided by its analytic RMS so the signal has unit RMS over whole periods.
struct FourSineParams {
  double amplitude = 1.3;
  double f0 = 1.0 / 60.0;
  double sample_spacing = 1.0;
};

Vector gen_four_sine(std::size_t steps, const FourSineParams& params = {});

}  // namespace lyap
