#pragma once

// Autoencoder over Lyapunov spectra with a joint reconstruction and
// loss-prediction objective, plus PCA of its latent layer.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "lyap/lyapunov.hpp"
#include "lyap/matrix.hpp"
#include "lyap/serialize.hpp"

namespace lyap {

enum class LossNorm { L1, L2 };

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct AeModel {
  std::vector<DenseLayer> encoder;  // tanh between layers, linear latent
  std::vector<DenseLayer> decoder;  // tanh between layers, linear output
  DenseLayer predictor;             // latent -> 1

  // z-score statistics of the training spectra and of log(loss + 1e-8)
  Vector spectrum_mean, spectrum_scale;
  double target_mean = 0.0, target_scale = 1.0;

  std::size_t input_size() const { return encoder.front().w.cols(); }
  std::size_t latent_dim() const { return encoder.back().w.rows(); }
  friend bool operator==(const AeModel&, const AeModel&) = default;
};

struct AeConfig {
  std::vector<std::size_t> layer_sizes{128, 64, 32};  // encoder widths, last is the latent
  LossNorm l_norm = LossNorm::L1;
  double alpha_max = 1.0;
  std::optional<std::size_t> alpha_ramp_start_epoch;  // unset: start when reconstruction stalls
  std::size_t alpha_ramp_fallback_epoch = 50;
  std::size_t alpha_ramp_epochs = 50;
  std::size_t epochs = 300;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// Zero weights of the given shapes; input_size is the spectrum length.
AeModel make_ae_model(std::size_t input_size, std::span<const std::size_t> layer_sizes);
// Glorot-uniform weights, zero biases, identity standardization.
AeModel init_ae_model(std::size_t input_size, std::span<const std::size_t> layer_sizes,
                      std::uint64_t seed);

// All quantities in standardized (network) space.
struct AeOutput {
  Vector reconstruction;
  double prediction = 0.0;
  Vector latent;
};
AeOutput ae_forward(const AeModel& model, std::span<const double> z);

double ae_loss(std::span<const double> z, std::span<const double> z_hat, double t, double t_hat,
               double alpha, LossNorm norm);

// Uses config.alpha_ramp_start_epoch, or the fallback epoch when unset.
double alpha_at(const AeConfig& config, std::size_t epoch);

// Gradient of ae_loss at one sample, in the order of ae_parameters().
std::vector<Matrix> ae_gradient(const AeModel& model, std::span<const double> z, double t,
                                double alpha, LossNorm norm, double* loss = nullptr);

// Weights and biases as (n x 1) matrices: encoder, decoder, predictor.
std::vector<Matrix> ae_parameters(const AeModel& model);
void set_ae_parameters(AeModel& model, const std::vector<Matrix>& params);

// Interface between spectra/losses and network space.
Vector standardize_spectrum(const AeModel& model, std::span<const double> spectrum);
Vector destandardize_spectrum(const AeModel& model, std::span<const double> z);
double standardize_loss(const AeModel& model, double loss);
double destandardize_loss(const AeModel& model, double t);

Vector ae_encode(const AeModel& model, std::span<const double> spectrum);

struct AeReconstruction {
  Vector spectrum;
  double loss = 0.0;
};
AeReconstruction ae_reconstruct(const AeModel& model, std::span<const double> spectrum);

struct AeTrainResult {
  AeModel model;
  std::vector<double> loss_history;            // total objective after each epoch
  std::vector<double> reconstruction_history;  // reconstruction MSE after each epoch
  std::size_t ramp_start_epoch = 0;
};

// Spectra must share one length. Throws NumericError on divergence.
AeTrainResult ae_train(std::span<const SpectrumRecord> records, const AeConfig& config);

void save_ae_model(const std::filesystem::path& base, const AeModel& model,
                   json meta = json::object());
AeModel load_ae_model(const std::filesystem::path& base);

struct Embedding {
  Vector mean;
  Matrix axes;  // one unit axis per row, decreasing variance
  Vector variances;
  Vector explained_ratio;
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

Embedding pca_fit(std::span<const Vector> points);
Vector pca_project(const Embedding& embedding, std::span<const double> point, std::size_t k);
std::vector<Vector> pca_project(const Embedding& embedding, std::span<const Vector> points,
                                std::size_t k);

json embedding_to_json(const Embedding& embedding);
Embedding embedding_from_json(const json& j);

// Symmetric eigen-decomposition by cyclic Jacobi rotations. Eigenvalues
// descending; eigenvectors as rows.
void symmetric_eigen(const Matrix& a, Vector& values, Matrix& vectors);

}  // namespace lyap
