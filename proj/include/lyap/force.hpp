#pragma once

// FORCE learning: recursive least squares on the readout of a rank-1
// feedback network, with the readout fed back into the dynamics while it is
// being learned.

#include <cstdint>
#include <span>
#include <vector>

#include "lyap/cells.hpp"

namespace lyap {

struct ForceConfig {
  std::size_t N = 300;
  double g = 1.4;
  double dt = 0.1;
  double rls_delta = 1.0;  // P_0 = I / delta
  std::size_t train_steps = 6000;
  std::size_t test_steps = 1200;
  std::size_t update_stride = 2;
  double initial_state_scale = 0.5;  // x_0 ~ scale * N(0, 1)
  // Readout snapshots are taken at these fractions of train_steps.
  std::vector<double> checkpoint_fractions{};

  void validate() const;
};

CellSpec rank1_spec(const ForceConfig& config, std::uint64_t seed);

struct ForceCheckpoint {
  double fraction;
  Cell cell;
};

struct ForceResult {
  Cell cell;  // trained readout installed
  double test_error = 0.0;  // RMS(z - f) / RMS(f) over the test window; kLossCap when failed
  bool failed = false;
  Vector test_output;
  std::vector<ForceCheckpoint> checkpoints;
};

// Trains the readout of `cell` (a Rank1RNN) to reproduce target[t]. The
// target must cover train_steps + test_steps samples. `state_seed` draws x_0.
ForceResult force_train(const Cell& cell, const ForceConfig& config, std::span<const double> target,
                        std::uint64_t state_seed);

}  // namespace lyap
