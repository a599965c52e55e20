#pragma once

// Recurrent cell zoo. A Cell is an immutable parameter set plus the one-step
// state map of its architecture and the exact Jacobian of that map.
//
// State layout: hidden_size entries for VanillaRNN / GRU / Rank1RNN / ASRNN,
// 2*hidden_size for LSTM (h followed by c).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lyap/matrix.hpp"

namespace lyap {

enum class Architecture { VanillaRNN, LSTM, GRU, Rank1RNN, ASRNN, Linear };

std::string_view architecture_name(Architecture a);
// Parses the public zoo names; Linear is test-only and not accepted here.
std::optional<Architecture> parse_architecture(std::string_view name);

struct CellSpec {
  Architecture architecture = Architecture::VanillaRNN;
  std::size_t hidden_size = 1;
  std::size_t input_size = 1;
  // Half-width p of the uniform init for RNN/LSTM/GRU/ASRNN; gain g for Rank1RNN.
  double init_param = 0.1;
  std::uint64_t seed = 0;
  // Forward-Euler step of the rank-1 continuous dynamics.
  double dt = 0.1;
  // Antisymmetric RNN step size and diffusion.
  double asrnn_eps = 0.01;
  double asrnn_gamma = 0.01;

  void validate() const;
  std::size_t state_dim() const;
  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

struct Param {
  std::string name;
  Matrix value;
  friend bool operator==(const Param&, const Param&) = default;
};

class Cell {
 public:
  // Takes ownership of a full parameter set; shapes are checked against spec.
  Cell(CellSpec spec, std::vector<Param> params);

  const CellSpec& spec() const { return spec_; }
  std::size_t state_dim() const { return spec_.state_dim(); }
  std::size_t input_size() const { return spec_.input_size; }
  std::size_t hidden_size() const { return spec_.hidden_size; }

  const std::vector<Param>& params() const { return params_; }
  const Matrix& param(std::string_view name) const;
  // Returns a copy with one parameter replaced.
  Cell with_param(std::string_view name, Matrix value) const;

  Vector step(std::span<const double> state, std::span<const double> input) const;

  // J(i, j) = d next_j / d state_i.
  Matrix jacobian(std::span<const double> state, std::span<const double> input) const;

  // Transpose of jacobian(): row j holds d next_j / d state. This is the
  // linearized map that propagates tangent vectors forward in time.
  Matrix tangent_map(std::span<const double> state, std::span<const double> input) const;

  // Rank1RNN readout z = w_out . tanh(x). Zero for other architectures.
  double readout(std::span<const double> state) const;

  friend bool operator==(const Cell&, const Cell&) = default;

 private:
  void check_dims(std::span<const double> state, std::span<const double> input) const;
  const Matrix& p(std::size_t idx) const { return params_[idx].value; }

  CellSpec spec_;
  std::vector<Param> params_;
};

// Deterministic initialization from (spec, seed).
Cell init_cell(const CellSpec& spec);

// Expected parameter names and shapes for an architecture.
std::vector<Param> param_layout(const CellSpec& spec);

// Test-only map h' = A h + B x with B = 0.
Cell make_linear_cell(const Matrix& a, std::size_t input_size = 1);

double sigmoid(double x);

}  // namespace lyap
