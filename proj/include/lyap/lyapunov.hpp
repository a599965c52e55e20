#pragma once

// Lyapunov spectra by QR reorthonormalization of the tangent frame.
//
// For each input sequence the state starts at zero and the frame Q at the
// first k columns of the identity. Every step the frame is pushed through the
// tangent map and re-orthonormalized by a Householder QR; the logs of the
// (positive) R diagonal, accumulated after warmup and divided by the number
// of accumulated steps, are the exponents. Spectra from several sequences
// are averaged per index and then sorted descending.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lyap/cells.hpp"
#include "lyap/matrix.hpp"

namespace lyap {

enum class Task { TargetLearning, CharPrediction, SMNIST, Synthetic };

std::string_view task_name(Task t);
std::optional<Task> parse_task(std::string_view name);

struct LEConfig {
  std::size_t seq_len = 1000;   // accumulated steps T
  std::size_t n_inputs = 10;    // sequences averaged
  std::size_t warmup = 100;     // steps before accumulation
  std::size_t k_exponents = 0;  // 0 selects the full state dimension

  // Throws ContractError for a cell of state dimension d.
  void validate(std::size_t d) const;
  std::size_t exponents_for(std::size_t d) const { return k_exponents == 0 ? d : k_exponents; }
};

struct SpectrumRecord {
  Vector values;  // non-increasing
  std::string variant_id;
  Architecture architecture = Architecture::VanillaRNN;
  std::size_t hidden_size = 0;
  double init_param = 0.0;
  Task task = Task::Synthetic;
  double training_fraction = 1.0;
  double target_loss = 0.0;
  bool degenerate = false;

  friend bool operator==(const SpectrumRecord&, const SpectrumRecord&) = default;
};

// One input sequence: rows are time steps, columns the input dimension.
using InputSequence = Matrix;

// |R_kk| below this is clamped and flagged.
inline constexpr double kMinExpansion = 1e-300;

// In-place thin Householder QR of the k vectors stored as the rows of
// `frame` (k x D). On return the rows are orthonormal and r_diag holds the
// R diagonal, made non-negative by flipping the matching frame vector.
void orthonormalize(Matrix& frame, Vector& r_diag);

struct SequenceResult {
  Vector exponents;  // frame order, unsorted
  bool degenerate = false;
};

struct SequenceOptions {
  // k x D orthonormal rows; defaults to the leading identity columns.
  const Matrix* initial_frame = nullptr;
  // Called after every QR step with the step index, new frame and R diagonal.
  std::function<void(std::size_t, const Matrix&, std::span<const double>)> observer;
  std::string variant_id;
};

SequenceResult sequence_exponents(const Cell& cell, const InputSequence& inputs,
                                  const LEConfig& config, const SequenceOptions& options = {});

struct LERunOptions {
  std::size_t threads = 1;
  std::string variant_id;
};

// Averages sequence_exponents over inputs.size() sequences (must equal
// config.n_inputs). Metadata other than architecture/size/init_param is left
// for the caller.
SpectrumRecord compute_le(const Cell& cell, std::span<const InputSequence> inputs,
                          const LEConfig& config, const LERunOptions& options = {});

// Piecewise-linear resampling of (k-1)/(L1-1) -> values[k] onto target_len
// evenly spaced abscissae on [0, 1].
Vector interpolate_spectrum(std::span<const double> values, std::size_t target_len);

struct SpectrumStats {
  double mean;
  double max;
  double variance;  // population
};

SpectrumStats spectrum_stats(std::span<const double> values);

}  // namespace lyap
